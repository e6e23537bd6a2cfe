#include "pondstat/shuffle.hpp"

#include "pondstat/csv.hpp"
#include "pondstat/error.hpp"
#include "pondstat/random.hpp"

#include <algorithm>
#include <fstream>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace pondstat {

namespace {

constexpr int kMaxSplitDepth = 48;

// Removes every registered temp file when it goes out of scope.
class TempFiles {
public:
    explicit TempFiles(std::filesystem::path base) : base_(std::move(base)) {}
    ~TempFiles() {
        std::error_code ec;
        for (const auto& p : paths_) std::filesystem::remove(p, ec);
    }
    TempFiles(const TempFiles&) = delete;
    TempFiles& operator=(const TempFiles&) = delete;

    std::filesystem::path make() {
        auto p = base_;
        p += ".bucket" + std::to_string(paths_.size()) + ".tmp";
        paths_.push_back(p);
        return p;
    }
    static void release(const std::filesystem::path& p) {
        std::error_code ec;
        std::filesystem::remove(p, ec);
    }

private:
    std::filesystem::path base_;
    std::vector<std::filesystem::path> paths_;
};

struct Bucket {
    std::filesystem::path path;
    std::uint64_t bytes = 0;
};

void write_line(std::ofstream& out, std::string_view line, const std::filesystem::path& path) {
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.put('\n');
    if (!out) throw DataError("write failed on " + path.string() + " (disk full?)");
}

std::vector<Bucket> scatter(std::istream& in, std::uint64_t bucket_count, Rng& rng, TempFiles& temps,
                            std::uint64_t line_limit, std::uint64_t* rows, std::uint64_t& peak) {
    std::vector<Bucket> buckets(bucket_count);
    std::vector<std::unique_ptr<std::ofstream>> outs(bucket_count);
    for (std::uint64_t b = 0; b < bucket_count; ++b) {
        buckets[b].path = temps.make();
        outs[b] = std::make_unique<std::ofstream>(buckets[b].path, std::ios::binary | std::ios::trunc);
        if (!*outs[b]) throw DataError("cannot create temporary file " + buckets[b].path.string());
    }
    std::string line;
    while (std::getline(in, line)) {
        const std::string_view text = csv::strip_cr(line);
        if (text.size() + 1 > line_limit) {
            throw DataError("a record of " + std::to_string(text.size() + 1) +
                            " bytes exceeds the memory budget");
        }
        if (csv::has_open_quote(text)) {
            throw DataError("record with an embedded newline (unclosed quote) cannot be shuffled");
        }
        peak = std::max<std::uint64_t>(peak, text.size() + 1);
        const std::uint64_t b = uniform_below(rng, bucket_count);
        write_line(*outs[b], text, buckets[b].path);
        buckets[b].bytes += text.size() + 1;
        if (rows != nullptr) ++*rows;
    }
    for (std::uint64_t b = 0; b < bucket_count; ++b) {
        outs[b]->close();
        if (!*outs[b]) throw DataError("write failed on " + buckets[b].path.string());
    }
    return buckets;
}

class Shuffler {
public:
    Shuffler(std::ofstream& out, const std::filesystem::path& out_path, std::uint64_t budget, std::uint64_t seed,
             TempFiles& temps, ShuffleReport& report)
        : out_(out), out_path_(out_path), budget_(budget), rng_(splitmix64(seed)), temps_(temps),
          report_(report) {}

    // Emits the rows of `bucket` in uniformly random order.
    void drain(const Bucket& bucket, int depth) {
        if (bucket.bytes > budget_) {
            if (depth >= kMaxSplitDepth) throw DataError("cannot split shuffle bucket below the memory budget");
            std::ifstream in(bucket.path, std::ios::binary);
            const std::uint64_t parts = std::max<std::uint64_t>(2, (2 * bucket.bytes + budget_ - 1) / budget_);
            auto pieces = scatter(in, parts, rng_, temps_, budget_, nullptr, report_.bytes_peak_memory);
            in.close();
            TempFiles::release(bucket.path);
            report_.buckets += parts - 1;
            for (const auto& piece : pieces) drain(piece, depth + 1);
            return;
        }

        std::string content(bucket.bytes, '\0');
        {
            std::ifstream in(bucket.path, std::ios::binary);
            in.read(content.data(), static_cast<std::streamsize>(content.size()));
            if (static_cast<std::uint64_t>(in.gcount()) != bucket.bytes) {
                throw DataError("short read on " + bucket.path.string());
            }
        }
        TempFiles::release(bucket.path);
        report_.bytes_peak_memory = std::max(report_.bytes_peak_memory, bucket.bytes);

        std::vector<std::string_view> rows;
        std::size_t pos = 0;
        while (pos < content.size()) {
            const std::size_t nl = content.find('\n', pos);
            rows.emplace_back(content.data() + pos, nl - pos);
            pos = nl + 1;
        }
        // Fisher-Yates
        for (std::size_t i = rows.size(); i > 1; --i) {
            std::swap(rows[i - 1], rows[uniform_below(rng_, i)]);
        }
        for (auto row : rows) write_line(out_, row, out_path_);
        report_.output_rows += rows.size();
    }

private:
    std::ofstream& out_;
    const std::filesystem::path& out_path_;
    std::uint64_t budget_;
    Rng rng_;
    TempFiles& temps_;
    ShuffleReport& report_;
};

} // namespace

ShuffleReport shuffle_file(const std::filesystem::path& in_path, const std::filesystem::path& out_path,
                           std::uint64_t memory_budget, std::uint64_t seed) {
    if (memory_budget < 2) throw UsageError("memory budget is too small");
    std::ifstream in(in_path, std::ios::binary);
    if (!in) throw DataError("cannot open " + in_path.string());

    std::string header;
    if (!std::getline(in, header)) throw DataError(in_path.string() + " is empty");
    header = std::string(csv::strip_cr(header));

    ShuffleReport report;
    report.seed = seed;

    std::error_code ec;
    const std::uint64_t file_size = std::filesystem::file_size(in_path, ec);
    const std::uint64_t half = std::max<std::uint64_t>(1, memory_budget / 2);
    const std::uint64_t bucket_count = std::max<std::uint64_t>(1, (file_size + half - 1) / half);
    report.buckets = bucket_count;

    TempFiles temps(out_path);
    Rng scatter_rng(seed);
    const auto buckets = scatter(in, bucket_count, scatter_rng, temps, memory_budget, &report.input_rows,
                                 report.bytes_peak_memory);
    if (in.bad()) throw DataError("read failed on " + in_path.string());

    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + out_path.string());
    try {
        write_line(out, header, out_path);
        Shuffler shuffler(out, out_path, memory_budget, splitmix64(seed ^ 0xa0761d6478bd642fULL), temps,
                          report);
        for (const auto& bucket : buckets) shuffler.drain(bucket, 0);
        out.close();
        if (!out) throw DataError("write failed on " + out_path.string());
    } catch (...) {
        out.close();
        std::filesystem::remove(out_path, ec);
        throw;
    }
    if (report.output_rows != report.input_rows) {
        throw DataError("shuffle lost rows: read " + std::to_string(report.input_rows) + ", wrote " +
                        std::to_string(report.output_rows));
    }
    return report;
}

} // namespace pondstat
