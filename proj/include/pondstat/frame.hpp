#pragma once

#include "pondstat/source.hpp"

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pondstat {

/// One column of a subsample. Quantitative cells live in `values` with NaN
/// as the missing marker; qualitative cells live in `labels`.
struct Column {
    std::string name;
    Role role = Role::quantitative;
    std::vector<double> values;
    std::vector<std::optional<std::string>> labels;

    [[nodiscard]] bool quantitative() const noexcept { return role == Role::quantitative; }
    [[nodiscard]] std::size_t size() const noexcept {
        return quantitative() ? values.size() : labels.size();
    }
    [[nodiscard]] bool missing(std::size_t row) const noexcept {
        return quantitative() ? std::isnan(values[row]) : !labels[row].has_value();
    }
};

/// Cell text used for grouping and frequency tables; nullopt when missing.
std::optional<std::string> cell_label(const Column& column, std::size_t row);

/// Numeric view of a column. Qualitative labels are parsed; anything that
/// is not a finite number becomes NaN.
std::vector<double> numeric_values(const Column& column);

/// One replicate's parsed rows (the subsample S_k), including `_INTERCEPT_`.
struct Frame {
    std::size_t replicate = 0;
    std::size_t rows = 0;
    std::vector<Column> columns;
    std::size_t discarded = 0;
    std::vector<std::string> warnings;

    [[nodiscard]] const Column* find(std::string_view name) const noexcept;
    [[nodiscard]] Column* find(std::string_view name) noexcept;
    /// Throws UsageError naming the column when absent.
    [[nodiscard]] const Column& column(std::string_view name) const;
    [[nodiscard]] std::size_t index_of(std::string_view name) const;
    [[nodiscard]] std::vector<std::string> names() const;
};

} // namespace pondstat
