#pragma once

#include <cstdint>
#include <filesystem>

namespace pondstat {

struct ShuffleReport {
    std::uint64_t input_rows = 0;
    std::uint64_t output_rows = 0;
    std::uint64_t buckets = 0;
    /// Largest number of row bytes held in memory at once.
    std::uint64_t bytes_peak_memory = 0;
    std::uint64_t seed = 0;
};

/// Writes a uniformly random permutation of the data rows of `in_path` to
/// `out_path`, keeping the header first. Two passes: every row is sent to an
/// independent uniform bucket file, then each bucket is loaded and permuted
/// in memory. A bucket that does not fit the budget is split again. Output
/// uses '\n' line endings. Temporary bucket files live next to `out_path`.
ShuffleReport shuffle_file(const std::filesystem::path& in_path, const std::filesystem::path& out_path,
                           std::uint64_t memory_budget, std::uint64_t seed);

} // namespace pondstat
