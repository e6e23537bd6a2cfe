#pragma once

#include "pondstat/mapped_file.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pondstat {

/// Synthetic constant-1 column appended to every dataset.
inline constexpr std::string_view kIntercept = "_INTERCEPT_";

enum class Role { quantitative, qualitative, dropped };

std::string_view to_string(Role role) noexcept;

/// Declared variable information for a CSV source: which columns are
/// quantitative, which are excluded, and the retained levels of qualitative
/// columns. Stored on disk as JSON with keys `qlist`, `drop`, `scale_level`.
struct Codebook {
    std::vector<std::string> qlist;
    std::vector<std::string> drop;
    std::map<std::string, std::vector<std::string>> scale_level;

    static Codebook parse_json(std::string_view text);
    static Codebook load(const std::filesystem::path& path);

    /// Throws UsageError unless the three key sets are disjoint and every
    /// name is a header column or `_INTERCEPT_`.
    void validate(const std::vector<std::string>& header) const;
};

struct ColumnSpec {
    std::string name;
    Role role = Role::qualitative;
    std::vector<std::string> levels; // declared levels, qualitative columns only
};

/// One role per file column, plus `_INTERCEPT_` (always quantitative) last.
class Schema {
public:
    Schema() = default;

    static Schema all_qualitative(const std::vector<std::string>& header);
    static Schema from_codebook(const std::vector<std::string>& header, const Codebook& codebook);

    [[nodiscard]] const std::vector<ColumnSpec>& columns() const noexcept { return columns_; }
    [[nodiscard]] const ColumnSpec* find(std::string_view name) const noexcept;
    [[nodiscard]] std::vector<std::string> names_with_role(Role role) const;

    bool operator==(const Schema&) const = default;

private:
    std::vector<ColumnSpec> columns_;
};

enum class SourceType { no_codebook, with_codebook };

struct OpenOptions {
    std::size_t probes = 1000;
    std::uint64_t seed = 0;
    /// Count rows with a full pass instead of probing. Slow on big files.
    bool exact_count = false;
    /// Overrides the file-name heuristic (`*.shuffle*` is assumed shuffled).
    std::optional<bool> shuffled;
};

/// An opened CSV source. Data rows occupy bytes [data_start, data_end) of
/// the mapped file; the header line is excluded. Immutable once built.
struct DatasetHandle {
    std::filesystem::path path;
    std::uint64_t data_start = 0;
    std::uint64_t data_end = 0;
    std::vector<std::string> header;
    Schema schema;
    std::uint64_t n_estimate = 0;
    bool shuffled = false;
    std::shared_ptr<const MappedFile> file;

    [[nodiscard]] std::string_view bytes() const noexcept { return file->bytes(); }
    [[nodiscard]] bool empty() const noexcept { return data_start == data_end; }
    [[nodiscard]] std::size_t header_index(std::string_view name) const;
};

/// Instrumentation: bytes of the file examined by an operation.
struct ReadCounter {
    std::uint64_t bytes = 0;
};

DatasetHandle open_dataset(const std::filesystem::path& path, SourceType type,
                           const std::optional<Codebook>& codebook = std::nullopt,
                           const OpenOptions& options = {}, ReadCounter* counter = nullptr);

/// Estimates the row count as the data extent divided by the mean length of
/// the lines hit by `probes` uniform byte offsets.
std::uint64_t estimate_row_count(const DatasetHandle& handle, std::size_t probes,
                                 std::uint64_t seed = 0, ReadCounter* counter = nullptr);

/// Exact row count by a full pass over the data.
std::uint64_t count_rows_exact(const DatasetHandle& handle);

/// Reassigns roles: `qlist` quantitative, `drop` dropped, everything else
/// qualitative. Declared levels are kept.
DatasetHandle update_schema(DatasetHandle handle, const std::vector<std::string>& qlist,
                            const std::vector<std::string>& drop);

namespace lines {

/// Start of the line after the one containing `offset`, wrapping to
/// `data_start` when that line is the last one.
std::uint64_t next_line_start(std::string_view bytes, std::uint64_t offset,
                              std::uint64_t data_start, std::uint64_t data_end) noexcept;

/// The line beginning at `start` without its terminator, and where the next
/// line begins (data_end when there is none).
struct Line {
    std::string_view text;
    std::uint64_t next;
};
Line line_at(std::string_view bytes, std::uint64_t start, std::uint64_t data_end) noexcept;

} // namespace lines

} // namespace pondstat
