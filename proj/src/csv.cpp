#include "pondstat/csv.hpp"

#include "pondstat/error.hpp"

#include <array>
#include <charconv>
#include <cmath>

namespace pondstat::csv {

namespace {

bool iequals(std::string_view a, std::string_view b) noexcept {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        char c = a[i];
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        if (c != b[i]) return false;
    }
    return true;
}

std::string_view trim(std::string_view s) noexcept {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

} // namespace

bool is_missing_lexeme(std::string_view cell) noexcept {
    cell = trim(cell);
    return cell.empty() || iequals(cell, "na") || iequals(cell, "nan");
}

std::optional<double> parse_number(std::string_view cell) noexcept {
    cell = trim(cell);
    if (cell.empty()) return std::nullopt;
    if (cell.front() == '+') {
        cell.remove_prefix(1);
        if (cell.empty() || cell.front() == '-') return std::nullopt;
    }
    double value = 0.0;
    const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || end != cell.data() + cell.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    std::array<char, 32> buf{};
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), end);
}

bool has_open_quote(std::string_view line) noexcept {
    bool in_quotes = false;
    bool field_start = true;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') ++i;
                else in_quotes = false;
            }
            continue;
        }
        if (c == '"' && field_start) {
            in_quotes = true;
            field_start = false;
            continue;
        }
        field_start = c == ',';
    }
    return in_quotes;
}

void split_record(std::string_view line, std::vector<std::string>& fields) {
    line = strip_cr(line);
    std::size_t used = 0;
    auto next_field = [&]() -> std::string& {
        if (used == fields.size()) fields.emplace_back();
        std::string& f = fields[used++];
        f.clear();
        return f;
    };

    std::size_t i = 0;
    const std::size_t n = line.size();
    while (true) {
        std::string& field = next_field();
        if (i < n && line[i] == '"') {
            ++i;
            bool closed = false;
            while (i < n) {
                const char c = line[i];
                if (c == '"') {
                    if (i + 1 < n && line[i + 1] == '"') {
                        field.push_back('"');
                        i += 2;
                        continue;
                    }
                    ++i;
                    closed = true;
                    break;
                }
                field.push_back(c);
                ++i;
            }
            if (!closed) {
                throw DataError("quoted field not closed on its line (records must not contain "
                                "embedded newlines)");
            }
            // Anything between the closing quote and the separator is kept verbatim.
            while (i < n && line[i] != ',') field.push_back(line[i++]);
        } else {
            const std::size_t comma = line.find(',', i);
            const std::size_t stop = comma == std::string_view::npos ? n : comma;
            field.assign(line.substr(i, stop - i));
            i = stop;
        }
        if (i >= n) break;
        ++i; // skip ','
    }
    fields.resize(used);
}

std::vector<std::string> split_record(std::string_view line) {
    std::vector<std::string> fields;
    split_record(line, fields);
    return fields;
}

std::string quote_field(std::string_view field) {
    const bool needs = field.find_first_of(",\"") != std::string_view::npos ||
                       (!field.empty() && (field.front() == ' ' || field.back() == ' '));
    if (!needs) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

} // namespace pondstat::csv
