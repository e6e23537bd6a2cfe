#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pondstat::csv {

/// Empty string, `NA` and `nan` (any case) denote a missing cell.
bool is_missing_lexeme(std::string_view cell) noexcept;

/// Parses a finite number. Surrounding blanks and a leading '+' are
/// accepted; missing lexemes, text and non-finite values yield nullopt.
std::optional<double> parse_number(std::string_view cell) noexcept;

/// Shortest text that reads back to the same double; `nan` for NaN.
std::string format_number(double value);

/// Drops one trailing '\r' (CRLF input).
constexpr std::string_view strip_cr(std::string_view line) noexcept {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
}

/// True when the line ends inside a quoted field, i.e. the record would
/// continue on the next line.
bool has_open_quote(std::string_view line) noexcept;

/// Splits one comma-separated record into `fields` (capacity is reused).
/// Quoted fields may contain commas and doubled quotes. A quote left open
/// at end of line throws DataError: records must not span lines.
void split_record(std::string_view line, std::vector<std::string>& fields);

std::vector<std::string> split_record(std::string_view line);

/// Quotes a field when it contains a comma, quote or leading/trailing blank.
std::string quote_field(std::string_view field);

} // namespace pondstat::csv
