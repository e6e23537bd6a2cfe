#include "pondstat/pump.hpp"

#include "pondstat/csv.hpp"
#include "pondstat/error.hpp"
#include "pondstat/random.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace pondstat {

void SamplingPlan::validate() const {
    if (n < 1) throw UsageError("subsample size must be at least 1");
    if (k_max < 1) throw UsageError("number of replicates must be at least 1");
    if (se_target && !(*se_target > 0.0)) throw UsageError("SE target must be positive");
}

namespace {

void require_data(const DatasetHandle& handle, std::size_t n) {
    if (n == 0) throw UsageError("subsample size must be at least 1");
    if (handle.empty()) throw DataError(handle.path.string() + " has no data rows");
}

} // namespace

// ---------------------------------------------------------------------------
// Line index

LineIndex LineIndex::build(const DatasetHandle& handle) {
    LineIndex index;
    const std::string_view bytes = handle.bytes();
    std::uint64_t pos = handle.data_start;
    while (pos < handle.data_end) {
        index.offsets_.push_back(pos);
        pos = lines::line_at(bytes, pos, handle.data_end).next;
    }
    return index;
}

std::filesystem::path LineIndex::sidecar_path(const std::filesystem::path& data_path) {
    auto p = data_path;
    p += ".lix";
    return p;
}

void LineIndex::save(const std::filesystem::path& index_path) const {
    std::ofstream out(index_path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write line index " + index_path.string());
    for (std::uint64_t offset : offsets_) {
        unsigned char le[8];
        for (int i = 0; i < 8; ++i) le[i] = static_cast<unsigned char>(offset >> (8 * i));
        out.write(reinterpret_cast<const char*>(le), 8);
    }
    if (!out) throw DataError("failed writing line index " + index_path.string());
}

LineIndex LineIndex::load(const std::filesystem::path& index_path, const DatasetHandle& handle) {
    std::ifstream in(index_path, std::ios::binary);
    if (!in) throw DataError("cannot read line index " + index_path.string());
    LineIndex index;
    unsigned char le[8];
    while (in.read(reinterpret_cast<char*>(le), 8)) {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(le[i]) << (8 * i);
        index.offsets_.push_back(v);
    }
    if (in.gcount() != 0) throw DataError("line index " + index_path.string() + " is truncated");

    const std::string_view bytes = handle.bytes();
    bool ok = handle.empty() ? index.offsets_.empty()
                             : !index.offsets_.empty() && index.offsets_.front() == handle.data_start;
    for (std::size_t i = 0; ok && i < index.offsets_.size(); ++i) {
        const std::uint64_t off = index.offsets_[i];
        ok = off < handle.data_end && (i == 0 || (off > index.offsets_[i - 1] && bytes[off - 1] == '\n'));
    }
    if (ok && !index.offsets_.empty()) {
        ok = lines::line_at(bytes, index.offsets_.back(), handle.data_end).next == handle.data_end;
    }
    if (!ok) throw DataError("line index " + index_path.string() + " does not match the data file");
    return index;
}

LineIndex LineIndex::open_or_build(const DatasetHandle& handle) {
    const auto path = sidecar_path(handle.path);
    std::error_code ec;
    if (std::filesystem::exists(path, ec) &&
        std::filesystem::last_write_time(path, ec) >= std::filesystem::last_write_time(handle.path, ec)) {
        try {
            return load(path, handle);
        } catch (const DataError&) {
            // stale; rebuild below
        }
    }
    LineIndex index = build(handle);
    index.save(path);
    return index;
}

// ---------------------------------------------------------------------------
// Line sampling

std::vector<std::string_view> sample_lines_sequential(const DatasetHandle& handle, std::size_t n,
                                                      std::uint64_t seed) {
    require_data(handle, n);
    const std::string_view bytes = handle.bytes();
    Rng rng(seed);
    const std::uint64_t hit = handle.data_start + uniform_below(rng, handle.data_end - handle.data_start);
    const std::uint64_t first = lines::next_line_start(bytes, hit, handle.data_start, handle.data_end);

    std::vector<std::string_view> out;
    out.reserve(n);
    std::uint64_t pos = first;
    bool wrapped = false;
    while (out.size() < n) {
        if (pos >= handle.data_end) {
            if (wrapped) break;
            wrapped = true;
            pos = handle.data_start;
        }
        if (wrapped && pos >= first) break; // every row taken once
        const auto line = lines::line_at(bytes, pos, handle.data_end);
        out.push_back(line.text);
        pos = line.next;
    }
    return out;
}

std::vector<std::string_view> sample_lines_random(const DatasetHandle& handle, std::size_t n,
                                                  std::uint64_t seed) {
    require_data(handle, n);
    const std::string_view bytes = handle.bytes();
    const std::uint64_t extent = handle.data_end - handle.data_start;
    Rng rng(seed);
    std::vector<std::string_view> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t hit = handle.data_start + uniform_below(rng, extent);
        const std::uint64_t start = lines::next_line_start(bytes, hit, handle.data_start, handle.data_end);
        out.push_back(lines::line_at(bytes, start, handle.data_end).text);
    }
    return out;
}

std::vector<std::string_view> sample_lines_indexed(const DatasetHandle& handle, const LineIndex& index,
                                                   std::size_t n, std::uint64_t seed) {
    require_data(handle, n);
    if (index.size() == 0) throw DataError("line index is empty");
    const std::string_view bytes = handle.bytes();
    Rng rng(seed);
    std::vector<std::string_view> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t row = uniform_below(rng, index.size());
        out.push_back(lines::line_at(bytes, index.offset(row), handle.data_end).text);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Parsing

Frame parse_frame(std::span<const std::string_view> lines, const Schema& schema) {
    const auto& specs = schema.columns();
    const std::size_t arity = specs.size() - 1; // _INTERCEPT_ is not in the file

    Frame frame;
    std::vector<int> slot(arity, -1);
    for (std::size_t j = 0; j < arity; ++j) {
        if (specs[j].role == Role::dropped) continue;
        slot[j] = static_cast<int>(frame.columns.size());
        Column col;
        col.name = specs[j].name;
        col.role = specs[j].role;
        if (col.quantitative()) col.values.reserve(lines.size());
        else col.labels.reserve(lines.size());
        frame.columns.push_back(std::move(col));
    }

    std::vector<std::string> fields;
    for (std::string_view line : lines) {
        csv::split_record(line, fields);
        if (fields.size() != arity) {
            ++frame.discarded;
            continue;
        }
        for (std::size_t j = 0; j < arity; ++j) {
            if (slot[j] < 0) continue;
            Column& col = frame.columns[static_cast<std::size_t>(slot[j])];
            if (col.quantitative()) {
                col.values.push_back(csv::parse_number(fields[j]).value_or(std::nan("")));
            } else if (csv::is_missing_lexeme(fields[j])) {
                col.labels.emplace_back(std::nullopt);
            } else {
                col.labels.emplace_back(std::move(fields[j]));
            }
        }
        ++frame.rows;
    }

    Column intercept;
    intercept.name = std::string(kIntercept);
    intercept.role = Role::quantitative;
    intercept.values.assign(frame.rows, 1.0);
    frame.columns.push_back(std::move(intercept));

    if (!lines.empty() && frame.discarded > 0) {
        const double share = static_cast<double>(frame.discarded) / static_cast<double>(lines.size());
        const std::string msg = std::to_string(frame.discarded) + " of " + std::to_string(lines.size()) +
                                " records discarded (field count differs from header)";
        if (share > 0.5) throw DataError(msg);
        if (share > 0.01) frame.warnings.push_back(msg);
    }
    return frame;
}

Frame draw_sequential(const DatasetHandle& handle, std::size_t n, std::uint64_t seed) {
    const auto lines = sample_lines_sequential(handle, n, seed);
    return parse_frame(lines, handle.schema);
}

Frame draw_random_access(const DatasetHandle& handle, std::size_t n, std::uint64_t seed) {
    const auto lines = sample_lines_random(handle, n, seed);
    return parse_frame(lines, handle.schema);
}

namespace {

Frame draw_with_seed(const DatasetHandle& handle, const SamplingPlan& plan, std::uint64_t seed,
                     const LineIndex* index) {
    std::vector<std::string_view> lines;
    if (plan.sequential) {
        lines = sample_lines_sequential(handle, plan.n, seed);
    } else if (plan.use_index) {
        if (index == nullptr) throw UsageError("indexed sampling requested without a line index");
        lines = sample_lines_indexed(handle, *index, plan.n, seed);
    } else {
        lines = sample_lines_random(handle, plan.n, seed);
    }
    return parse_frame(lines, handle.schema);
}

} // namespace

Frame draw_replicate(const DatasetHandle& handle, const SamplingPlan& plan, std::size_t k,
                     const LineIndex* index) {
    Frame f = draw_with_seed(handle, plan, replicate_seed(plan.master_seed, k), index);
    f.replicate = k;
    return f;
}

Frame draw_holdout(const DatasetHandle& handle, const SamplingPlan& plan, std::size_t k,
                   const LineIndex* index) {
    Frame f = draw_with_seed(handle, plan, holdout_seed(plan.master_seed, k), index);
    f.replicate = k;
    return f;
}

} // namespace pondstat
