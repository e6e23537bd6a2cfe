#pragma once

#include <string>
#include <vector>

namespace pondstat {

/// `value` with `decimals` digits after the point; `nan` for NaN and
/// `inf`/`-inf` for infinities.
std::string format_fixed(double value, int decimals);

/// Plain fixed-width console table: first column left-aligned, the rest
/// right-aligned, two spaces between columns.
class TextTable {
public:
    explicit TextTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_row(std::vector<std::string> cells) { rows_.push_back(std::move(cells)); }
    [[nodiscard]] std::string render() const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

} // namespace pondstat
