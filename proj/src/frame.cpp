#include "pondstat/frame.hpp"

#include "pondstat/csv.hpp"
#include "pondstat/error.hpp"

namespace pondstat {

std::optional<std::string> cell_label(const Column& column, std::size_t row) {
    if (column.quantitative()) {
        const double v = column.values[row];
        if (std::isnan(v)) return std::nullopt;
        return csv::format_number(v);
    }
    return column.labels[row];
}

std::vector<double> numeric_values(const Column& column) {
    if (column.quantitative()) return column.values;
    std::vector<double> out;
    out.reserve(column.labels.size());
    for (const auto& label : column.labels) {
        const auto v = label ? csv::parse_number(*label) : std::nullopt;
        out.push_back(v.value_or(std::nan("")));
    }
    return out;
}

const Column* Frame::find(std::string_view name) const noexcept {
    for (const auto& c : columns) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

Column* Frame::find(std::string_view name) noexcept {
    for (auto& c : columns) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

const Column& Frame::column(std::string_view name) const {
    if (const Column* c = find(name)) return *c;
    throw UsageError("unknown column '" + std::string(name) + "'");
}

std::size_t Frame::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].name == name) return i;
    }
    throw UsageError("unknown column '" + std::string(name) + "'");
}

std::vector<std::string> Frame::names() const {
    std::vector<std::string> out;
    out.reserve(columns.size());
    for (const auto& c : columns) out.push_back(c.name);
    return out;
}

} // namespace pondstat
