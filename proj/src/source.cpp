#include "pondstat/source.hpp"

#include "pondstat/csv.hpp"
#include "pondstat/error.hpp"
#include "pondstat/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace pondstat {

std::string_view to_string(Role role) noexcept {
    switch (role) {
    case Role::quantitative: return "quantitative";
    case Role::qualitative: return "qualitative";
    case Role::dropped: return "dropped";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Codebook

Codebook Codebook::parse_json(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("codebook is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw UsageError("codebook must be a JSON object");

    auto names = [&](const char* key) {
        std::vector<std::string> out;
        if (!doc.contains(key)) return out;
        const auto& v = doc.at(key);
        if (!v.is_array()) throw UsageError(std::string("codebook key '") + key + "' must be a list");
        for (const auto& item : v) {
            if (!item.is_string()) {
                throw UsageError(std::string("codebook key '") + key + "' must list column names");
            }
            out.push_back(item.get<std::string>());
        }
        return out;
    };

    Codebook cb;
    cb.qlist = names("qlist");
    cb.drop = names("drop");
    if (doc.contains("scale_level")) {
        const auto& levels = doc.at("scale_level");
        if (!levels.is_object()) throw UsageError("codebook key 'scale_level' must be an object");
        for (const auto& [column, list] : levels.items()) {
            if (!list.is_array()) {
                throw UsageError("scale_level for '" + column + "' must be a list");
            }
            std::vector<std::string> out;
            for (const auto& level : list) {
                // Levels may be written as numbers ([1, 2, 3]) or strings.
                out.push_back(level.is_string() ? level.get<std::string>()
                                                : level.is_number() ? csv::format_number(level.get<double>())
                                                                    : level.dump());
            }
            cb.scale_level.emplace(column, std::move(out));
        }
    }
    return cb;
}

Codebook Codebook::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read codebook " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_json(buf.str());
}

void Codebook::validate(const std::vector<std::string>& header) const {
    const std::set<std::string, std::less<>> known(header.begin(), header.end());
    std::set<std::string, std::less<>> seen;
    auto check = [&](const std::string& name, const char* key) {
        if (name != kIntercept && !known.contains(name)) {
            throw UsageError("codebook " + std::string(key) + " names unknown column '" + name + "'");
        }
        if (!seen.insert(name).second) {
            throw UsageError("codebook lists column '" + name + "' more than once");
        }
    };
    for (const auto& n : qlist) check(n, "qlist");
    for (const auto& n : drop) {
        if (n == kIntercept) throw UsageError("_INTERCEPT_ cannot be dropped");
        check(n, "drop");
    }
    for (const auto& [n, levels] : scale_level) {
        if (n == kIntercept) throw UsageError("_INTERCEPT_ cannot have scale levels");
        check(n, "scale_level");
    }
}

// ---------------------------------------------------------------------------
// Schema

Schema Schema::all_qualitative(const std::vector<std::string>& header) {
    Schema s;
    s.columns_.reserve(header.size() + 1);
    for (const auto& name : header) s.columns_.push_back({name, Role::qualitative, {}});
    s.columns_.push_back({std::string(kIntercept), Role::quantitative, {}});
    return s;
}

Schema Schema::from_codebook(const std::vector<std::string>& header, const Codebook& codebook) {
    codebook.validate(header);
    Schema s = all_qualitative(header);
    for (auto& col : s.columns_) {
        if (col.name == kIntercept) continue;
        if (std::find(codebook.qlist.begin(), codebook.qlist.end(), col.name) != codebook.qlist.end()) {
            col.role = Role::quantitative;
        } else if (std::find(codebook.drop.begin(), codebook.drop.end(), col.name) != codebook.drop.end()) {
            col.role = Role::dropped;
        } else if (auto it = codebook.scale_level.find(col.name); it != codebook.scale_level.end()) {
            col.levels = it->second;
        }
    }
    return s;
}

const ColumnSpec* Schema::find(std::string_view name) const noexcept {
    for (const auto& c : columns_) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

std::vector<std::string> Schema::names_with_role(Role role) const {
    std::vector<std::string> out;
    for (const auto& c : columns_) {
        if (c.role == role) out.push_back(c.name);
    }
    return out;
}

std::size_t DatasetHandle::header_index(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw UsageError("unknown column '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Line helpers

namespace lines {

std::uint64_t next_line_start(std::string_view bytes, std::uint64_t offset, std::uint64_t data_start,
                              std::uint64_t data_end) noexcept {
    const void* hit = std::memchr(bytes.data() + offset, '\n', data_end - offset);
    if (hit == nullptr) return data_start;
    const auto next = static_cast<std::uint64_t>(static_cast<const char*>(hit) - bytes.data()) + 1;
    return next >= data_end ? data_start : next;
}

Line line_at(std::string_view bytes, std::uint64_t start, std::uint64_t data_end) noexcept {
    const void* hit = std::memchr(bytes.data() + start, '\n', data_end - start);
    if (hit == nullptr) return {bytes.substr(start, data_end - start), data_end};
    const auto nl = static_cast<std::uint64_t>(static_cast<const char*>(hit) - bytes.data());
    return {bytes.substr(start, nl - start), nl + 1};
}

} // namespace lines

namespace {

// Length (terminator included) of the line containing `offset`. Counts
// every byte examined, including the previous line's terminator.
std::uint64_t containing_line_length(std::string_view bytes, std::uint64_t offset, std::uint64_t data_start,
                                     std::uint64_t data_end, std::uint64_t& touched) {
    std::uint64_t begin = offset;
    while (begin > data_start) {
        ++touched;
        if (bytes[begin - 1] == '\n') break;
        --begin;
    }
    std::uint64_t end = offset;
    while (end < data_end) {
        ++touched;
        if (bytes[end++] == '\n') break;
    }
    return end - begin;
}

} // namespace

// ---------------------------------------------------------------------------
// Operations

DatasetHandle open_dataset(const std::filesystem::path& path, SourceType type,
                           const std::optional<Codebook>& codebook, const OpenOptions& options,
                           ReadCounter* counter) {
    if (!std::filesystem::exists(path)) throw DataError("no such file: " + path.string());

    DatasetHandle h;
    h.path = path;
    h.file = std::make_shared<const MappedFile>(path);
    const std::string_view bytes = h.file->bytes();
    if (bytes.empty()) throw DataError(path.string() + " is empty");

    const auto header_line = lines::line_at(bytes, 0, bytes.size());
    if (counter != nullptr) counter->bytes += header_line.next;
    h.data_start = header_line.next;
    h.data_end = bytes.size();

    std::string_view header_text = csv::strip_cr(header_line.text);
    if (header_text.size() >= 3 && header_text.substr(0, 3) == "\xEF\xBB\xBF") header_text.remove_prefix(3);
    h.header = csv::split_record(header_text);
    std::set<std::string, std::less<>> unique;
    for (auto& name : h.header) {
        if (name.empty()) throw DataError("header has an empty column name");
        if (name == kIntercept) throw DataError("header column collides with reserved name _INTERCEPT_");
        if (!unique.insert(name).second) throw DataError("duplicate header column '" + name + "'");
    }

    if (type == SourceType::with_codebook) {
        if (!codebook) throw UsageError("a codebook is required for this source type");
        h.schema = Schema::from_codebook(h.header, *codebook);
    } else {
        h.schema = Schema::all_qualitative(h.header);
    }

    h.shuffled = options.shuffled.value_or(path.filename().string().find(".shuffle") != std::string::npos);
    if (h.empty()) {
        h.n_estimate = 0;
    } else if (options.exact_count) {
        h.n_estimate = count_rows_exact(h);
    } else {
        h.n_estimate = estimate_row_count(h, options.probes, options.seed, counter);
    }
    return h;
}

std::uint64_t estimate_row_count(const DatasetHandle& handle, std::size_t probes, std::uint64_t seed,
                                 ReadCounter* counter) {
    if (probes == 0) throw UsageError("probes must be at least 1");
    if (handle.empty()) return 0;
    const std::string_view bytes = handle.bytes();
    const std::uint64_t extent = handle.data_end - handle.data_start;
    Rng rng(splitmix64(seed));
    std::uint64_t touched = 0;
    long double total_length = 0;
    for (std::size_t i = 0; i < probes; ++i) {
        const std::uint64_t offset = handle.data_start + uniform_below(rng, extent);
        total_length += static_cast<long double>(
            containing_line_length(bytes, offset, handle.data_start, handle.data_end, touched));
    }
    if (counter != nullptr) counter->bytes += touched;
    const long double mean_length = total_length / static_cast<long double>(probes);
    return static_cast<std::uint64_t>(std::llround(static_cast<long double>(extent) / mean_length));
}

std::uint64_t count_rows_exact(const DatasetHandle& handle) {
    if (handle.empty()) return 0;
    const std::string_view data =
        handle.bytes().substr(handle.data_start, handle.data_end - handle.data_start);
    auto rows = static_cast<std::uint64_t>(std::count(data.begin(), data.end(), '\n'));
    if (data.back() != '\n') ++rows;
    return rows;
}

DatasetHandle update_schema(DatasetHandle handle, const std::vector<std::string>& qlist,
                            const std::vector<std::string>& drop) {
    Codebook cb;
    cb.qlist = qlist;
    cb.drop = drop;
    for (const auto& col : handle.schema.columns()) {
        const bool listed = std::find(qlist.begin(), qlist.end(), col.name) != qlist.end() ||
                            std::find(drop.begin(), drop.end(), col.name) != drop.end();
        if (!col.levels.empty() && !listed) cb.scale_level.emplace(col.name, col.levels);
    }
    handle.schema = Schema::from_codebook(handle.header, cb);
    return handle;
}

} // namespace pondstat
