#pragma once

#include "pondstat/frame.hpp"
#include "pondstat/source.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace pondstat {

/// How replicates are drawn: subsample size n, replicate budget, access
/// mode and the optional SE stop threshold (display units, SE x 100).
struct SamplingPlan {
    std::size_t n = 100000;
    std::size_t k_max = 1;
    bool sequential = false;
    std::optional<double> se_target;
    std::uint64_t master_seed = 0;
    /// Random access through a `.lix` line index: exact uniform row choice
    /// instead of byte-offset seeking.
    bool use_index = false;

    /// Throws UsageError when an invariant is violated.
    void validate() const;
};

/// Byte offsets of every data row, persisted next to the data as `<data>.lix`
/// (little-endian 64-bit integers).
class LineIndex {
public:
    static LineIndex build(const DatasetHandle& handle);
    /// Loads the sidecar, throwing DataError when it does not match the data.
    static LineIndex load(const std::filesystem::path& index_path, const DatasetHandle& handle);
    /// Loads the sidecar when present and current, otherwise builds and saves it.
    static LineIndex open_or_build(const DatasetHandle& handle);
    static std::filesystem::path sidecar_path(const std::filesystem::path& data_path);

    void save(const std::filesystem::path& index_path) const;

    [[nodiscard]] std::size_t size() const noexcept { return offsets_.size(); }
    [[nodiscard]] std::uint64_t offset(std::size_t row) const noexcept { return offsets_[row]; }

private:
    std::vector<std::uint64_t> offsets_;
};

/// n consecutive lines after a uniform byte offset, wrapping from the end of
/// the data to its start at most once. Fewer than n lines only when the
/// file has fewer than n rows; then every row appears exactly once.
std::vector<std::string_view> sample_lines_sequential(const DatasetHandle& handle, std::size_t n,
                                                      std::uint64_t seed);

/// n independent byte-offset seeks, each taking the line that starts after
/// the hit (with replacement). A line's chance is proportional to the length
/// of the line before it.
std::vector<std::string_view> sample_lines_random(const DatasetHandle& handle, std::size_t n,
                                                  std::uint64_t seed);

/// n rows chosen uniformly with replacement through a line index.
std::vector<std::string_view> sample_lines_indexed(const DatasetHandle& handle, const LineIndex& index,
                                                   std::size_t n, std::uint64_t seed);

/// Parses raw records under `schema`: quantitative cells become numbers or
/// NaN, qualitative cells text or missing, dropped columns are skipped and
/// `_INTERCEPT_` is appended. Records with the wrong arity are discarded.
Frame parse_frame(std::span<const std::string_view> lines, const Schema& schema);

Frame draw_sequential(const DatasetHandle& handle, std::size_t n, std::uint64_t seed);
Frame draw_random_access(const DatasetHandle& handle, std::size_t n, std::uint64_t seed);

/// Frame for replicate k of a plan; its seed is replicate_seed(master_seed, k).
Frame draw_replicate(const DatasetHandle& handle, const SamplingPlan& plan, std::size_t k,
                     const LineIndex* index = nullptr);

/// Fresh frame paired with replicate k for out-of-sample evaluation.
Frame draw_holdout(const DatasetHandle& handle, const SamplingPlan& plan, std::size_t k,
                   const LineIndex* index = nullptr);

} // namespace pondstat
