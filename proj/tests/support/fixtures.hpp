#pragma once

#include "pondstat/frame.hpp"
#include "pondstat/source.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace testsupport {

namespace fs = std::filesystem;

/// Directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static int counter = 0;
        std::random_device rd;
        path_ = fs::temp_directory_path() /
                ("pondstat_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const fs::path& path() const { return path_; }
    [[nodiscard]] fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes `rows` lines produced by `row(i)` under `header`.
inline void write_csv(const fs::path& p, const std::string& header, std::size_t rows,
                      const std::function<std::string(std::size_t)>& row) {
    std::ofstream out(p, std::ios::binary);
    out << header << '\n';
    for (std::size_t i = 0; i < rows; ++i) out << row(i) << '\n';
}

inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Builds a frame directly, bypassing the pump.
inline pondstat::Column quant(std::string name, std::vector<double> values) {
    pondstat::Column c;
    c.name = std::move(name);
    c.role = pondstat::Role::quantitative;
    c.values = std::move(values);
    return c;
}

inline pondstat::Column qual(std::string name, std::vector<std::optional<std::string>> labels) {
    pondstat::Column c;
    c.name = std::move(name);
    c.role = pondstat::Role::qualitative;
    c.labels = std::move(labels);
    return c;
}

inline pondstat::Frame make_frame(std::vector<pondstat::Column> cols) {
    pondstat::Frame f;
    f.rows = cols.empty() ? 0 : cols.front().size();
    f.columns = std::move(cols);
    return f;
}

inline pondstat::DatasetHandle open_with_qlist(const fs::path& p, std::vector<std::string> qlist) {
    pondstat::Codebook cb;
    cb.qlist = std::move(qlist);
    pondstat::OpenOptions o;
    o.exact_count = true;
    return pondstat::open_dataset(p, pondstat::SourceType::with_codebook, cb, o);
}

} // namespace testsupport
