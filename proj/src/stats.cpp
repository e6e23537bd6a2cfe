#include "pondstat/stats.hpp"

#include "pondstat/csv.hpp"
#include "pondstat/error.hpp"
#include "pondstat/text_table.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace pondstat {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double median_in_place(std::vector<double>& v) {
    if (v.empty()) return kNaN;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return lower + (upper - lower) / 2.0;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return kNaN;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

std::vector<double> numeric_copy(const Frame& frame, const std::string& name) {
    return numeric_values(frame.column(name));
}

} // namespace

// ---------------------------------------------------------------------------
// Moments

double MomentSet::stddev() const noexcept { return count_valid == 0 ? kNaN : std::sqrt(m2); }

double MomentSet::skew() const noexcept {
    if (count_valid == 0) return kNaN;
    return m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
}

double MomentSet::kurt() const noexcept {
    if (count_valid == 0) return kNaN;
    return m2 > 0.0 ? m4 / (m2 * m2) : 0.0;
}

double MomentSet::missing_percent() const noexcept {
    const std::size_t total = count_valid + missing_count;
    return total == 0 ? kNaN : 100.0 * static_cast<double>(missing_count) / static_cast<double>(total);
}

MomentSet moments_of(std::span<const double> values) {
    MomentSet m;
    std::vector<double> valid;
    valid.reserve(values.size());
    for (double v : values) {
        if (std::isnan(v)) ++m.missing_count;
        else valid.push_back(v);
    }
    m.count_valid = valid.size();
    if (valid.empty()) {
        m.mean = m.m2 = m.m3 = m.m4 = m.min = m.median = m.max = kNaN;
        return m;
    }
    const double n = static_cast<double>(valid.size());
    double sum = 0.0;
    m.min = valid.front();
    m.max = valid.front();
    for (double v : valid) {
        sum += v;
        m.min = std::min(m.min, v);
        m.max = std::max(m.max, v);
    }
    m.mean = sum / n;
    double s2 = 0.0, s3 = 0.0, s4 = 0.0;
    for (double v : valid) {
        const double d = v - m.mean;
        const double d2 = d * d;
        s2 += d2;
        s3 += d2 * d;
        s4 += d2 * d2;
    }
    m.m2 = s2 / n;
    m.m3 = s3 / n;
    m.m4 = s4 / n;
    m.median = median_in_place(valid);
    return m;
}

MomentSet column_moments(const Frame& frame, std::string_view column) {
    const Column& c = frame.column(column);
    if (!c.quantitative()) {
        throw UsageError("column '" + std::string(column) + "' is qualitative; add it to qlist first");
    }
    return moments_of(c.values);
}

// ---------------------------------------------------------------------------
// Aggregation

StatsAggregate::StatsAggregate(std::vector<std::string> columns, StatsOptions options)
    : columns_(std::move(columns)), options_(options) {}

void StatsAggregate::merge(std::size_t k, std::size_t rows, std::vector<MomentSet> moments) {
    if (moments.size() != columns_.size()) throw std::logic_error("moment count does not match columns");
    by_k_[k] = Replicate{rows, std::move(moments)};
}

double StatsAggregate::mean_rows() const noexcept {
    if (by_k_.empty()) return 0.0;
    double total = 0.0;
    for (const auto& [k, r] : by_k_) total += static_cast<double>(r.rows);
    return total / static_cast<double>(by_k_.size());
}

std::vector<StatRow> StatsAggregate::table() const {
    std::vector<StatRow> out;
    double total_rows = 0.0;
    for (const auto& [k, r] : by_k_) total_rows += static_cast<double>(r.rows);

    for (std::size_t j = 0; j < columns_.size(); ++j) {
        std::vector<double> means, stds, medians, skews, kurts, mps;
        double lo = kNaN, hi = kNaN;
        for (const auto& [k, r] : by_k_) {
            const MomentSet& m = r.moments[j];
            mps.push_back(m.missing_percent());
            if (m.count_valid == 0) continue;
            means.push_back(m.mean);
            stds.push_back(m.stddev());
            medians.push_back(m.median);
            skews.push_back(m.skew());
            kurts.push_back(m.kurt());
            lo = std::isnan(lo) ? m.min : std::min(lo, m.min);
            hi = std::isnan(hi) ? m.max : std::max(hi, m.max);
        }
        StatRow row;
        row.column = columns_[j];
        row.mu = mean_of(means);
        row.std = mean_of(stds);
        row.min = lo;
        row.max = hi;
        row.med = median_in_place(medians);
        row.skew = mean_of(skews);
        row.kurt = mean_of(kurts);
        row.mp = mean_of(mps);
        double inv = total_rows > 0 ? 1.0 / total_rows : kNaN;
        if (options_.population_size && std::isfinite(*options_.population_size) && *options_.population_size > 0) {
            inv += 1.0 / *options_.population_size;
        }
        row.se = options_.population_size ? 100.0 * row.std * std::sqrt(inv) : 100.0 * row.std / std::sqrt(total_rows);
        out.push_back(row);
    }
    return out;
}

std::string render_stats_table(const std::vector<StatRow>& rows) {
    TextTable t({"", "Mu", "SE", "Std", "Min", "Med", "Max", "Skew", "Kurt", "mp"});
    for (const auto& r : rows) {
        t.add_row({r.column, format_fixed(r.mu, 2), format_fixed(r.se, 2), format_fixed(r.std, 2),
                   format_fixed(r.min, 1), format_fixed(r.med, 1), format_fixed(r.max, 1), format_fixed(r.skew, 2),
                   format_fixed(r.kurt, 2), format_fixed(r.mp, 1)});
    }
    return t.render() +
           "\n"
           "* Mu: mean of the replicate means\n"
           "* SE: standard error of Mu, x100\n"
           "* Std: mean of the replicate standard deviations\n"
           "* Min / Max: smallest replicate minimum / largest replicate maximum\n"
           "* Med: median of the replicate medians\n"
           "* Skew: mean replicate skewness\n"
           "* Kurt: mean replicate kurtosis (non-excess, 3 for a normal)\n"
           "* mp: mean share of missing or non-numeric cells, percent\n";
}

nlohmann::json stats_json(const std::vector<StatRow>& rows, std::size_t k, double n) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& r : rows) {
        list.push_back({{"column", r.column}, {"mu", r.mu},     {"se", r.se},     {"std", r.std}, {"min", r.min},
                        {"med", r.med},       {"max", r.max},   {"skew", r.skew}, {"kurt", r.kurt}, {"mp", r.mp}});
    }
    return {{"stats", std::move(list)}, {"k", k}, {"n", n}};
}

std::vector<std::string> default_stats_columns(const DatasetHandle& handle, const TransformProgram& program) {
    const auto cols = program.output_columns(handle.schema);
    std::vector<std::string> quantitative;
    std::vector<std::string> all;
    for (const auto& [name, role] : cols) {
        if (name == kIntercept) continue;
        all.push_back(name);
        if (role == Role::quantitative) quantitative.push_back(name);
    }
    if (quantitative.empty()) return all;
    return quantitative;
}

StatsAnalyzer::StatsAnalyzer(std::vector<std::string> columns, StatsOptions options)
    : aggregate_(std::move(columns), options) {
    if (aggregate_.columns().empty()) throw UsageError("no quantitative columns to summarize");
}

std::any StatsAnalyzer::summarize(const ReplicateContext& ctx) const {
    std::vector<MomentSet> moments;
    moments.reserve(aggregate_.columns().size());
    for (const auto& name : aggregate_.columns()) {
        const Column& c = ctx.frame.column(name);
        moments.push_back(c.quantitative() ? moments_of(c.values) : moments_of(numeric_values(c)));
    }
    return std::make_pair(ctx.frame.rows, std::move(moments));
}

void StatsAnalyzer::merge(std::size_t k, std::any summary) {
    auto s = std::any_cast<std::pair<std::size_t, std::vector<MomentSet>>>(std::move(summary));
    aggregate_.merge(k, s.first, std::move(s.second));
}

nlohmann::json StatsAnalyzer::snapshot() const {
    return stats_json(aggregate_.table(), aggregate_.replicates(), aggregate_.mean_rows());
}

std::string StatsAnalyzer::render_text() const { return render_stats_table(aggregate_.table()); }

bool StatsAnalyzer::se_below(double target) const {
    const auto rows = aggregate_.table();
    return !rows.empty() && std::all_of(rows.begin(), rows.end(), [&](const StatRow& r) { return r.se < target; });
}

std::vector<StatRow> run_stats(const DatasetHandle& handle, const SamplingPlan& plan,
                               const std::vector<std::string>& columns, const TransformProgram& program,
                               const std::function<void(std::size_t, const StatsAggregate&)>& on_update,
                               const RunOptions& options) {
    StatsAnalyzer analyzer(columns.empty() ? default_stats_columns(handle, program) : columns);
    run_replicates(handle, plan, program, analyzer,
                   [&](std::size_t k, TaskState) {
                       if (on_update) on_update(k, analyzer.aggregate());
                       return true;
                   },
                   options);
    return analyzer.aggregate().table();
}

// ---------------------------------------------------------------------------
// Frequency tables

std::map<std::string, std::uint64_t> count_levels(const Frame& frame, std::string_view column) {
    const Column& c = frame.column(column);
    std::map<std::string, std::uint64_t> counts;
    for (std::size_t r = 0; r < c.size(); ++r) {
        const auto label = cell_label(c, r);
        ++counts[label ? *label : std::string("nan")];
    }
    return counts;
}

FrequencyTable make_frequency_table(std::string variable, const std::map<std::string, std::uint64_t>& counts) {
    FrequencyTable t;
    t.variable = std::move(variable);
    for (const auto& [level, count] : counts) {
        t.levels.push_back({level, count, 0.0});
        t.total += count;
    }
    for (auto& l : t.levels) {
        l.percent = t.total == 0 ? 0.0 : 100.0 * static_cast<double>(l.count) / static_cast<double>(t.total);
    }
    std::stable_sort(t.levels.begin(), t.levels.end(),
                     [](const LevelCount& a, const LevelCount& b) { return a.count > b.count; });
    return t;
}

std::string render_frequency_tables(const std::vector<FrequencyTable>& tables, bool table_view) {
    std::string out;
    if (!tables.empty()) out += std::to_string(tables.front().total) + " counts.\n\n";
    for (std::size_t i = 0; i < tables.size(); ++i) {
        const auto& t = tables[i];
        out += "[ " + std::to_string(i) + " ] levels discovered for " + t.variable + ": " +
               std::to_string(t.levels_discovered()) + "\n";
        if (!table_view) continue;
        const std::size_t shown = std::min(t.levels.size(), FrequencyTable::kDisplayLimit);
        TextTable tt({"level", "percent", "count"});
        for (std::size_t j = 0; j < shown; ++j) {
            tt.add_row({t.levels[j].level, format_fixed(t.levels[j].percent, 2), std::to_string(t.levels[j].count)});
        }
        out += tt.render();
        if (t.capped()) out += "(only the " + std::to_string(FrequencyTable::kDisplayLimit) + " most frequent levels shown)\n";
        out += '\n';
    }
    return out;
}

nlohmann::json frequency_json(const std::vector<FrequencyTable>& tables, std::size_t k, double n) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& t : tables) {
        nlohmann::json levels = nlohmann::json::array();
        const std::size_t shown = std::min(t.levels.size(), FrequencyTable::kDisplayLimit);
        for (std::size_t j = 0; j < shown; ++j) {
            levels.push_back({{"level", t.levels[j].level}, {"count", t.levels[j].count}, {"percent", t.levels[j].percent}});
        }
        list.push_back({{"variable", t.variable},
                        {"levels_discovered", t.levels_discovered()},
                        {"total", t.total},
                        {"capped", t.capped()},
                        {"levels", std::move(levels)}});
    }
    return {{"tables", std::move(list)}, {"k", k}, {"n", n}};
}

TableAnalyzer::TableAnalyzer(std::vector<std::string> variables, bool table_view)
    : variables_(std::move(variables)), table_view_(table_view), counts_(variables_.size()) {
    if (variables_.empty()) throw UsageError("no variables to tabulate");
}

std::any TableAnalyzer::summarize(const ReplicateContext& ctx) const {
    std::vector<std::map<std::string, std::uint64_t>> counts;
    counts.reserve(variables_.size());
    for (const auto& v : variables_) counts.push_back(count_levels(ctx.frame, v));
    return std::make_pair(static_cast<std::uint64_t>(ctx.frame.rows), std::move(counts));
}

void TableAnalyzer::merge(std::size_t k, std::any summary) {
    auto s = std::any_cast<std::pair<std::uint64_t, std::vector<std::map<std::string, std::uint64_t>>>>(
        std::move(summary));
    for (std::size_t i = 0; i < variables_.size(); ++i) {
        for (const auto& [level, count] : s.second[i]) counts_[i][level] += count;
    }
    rows_ += s.first;
    k_ = std::max(k_, k);
}

std::vector<FrequencyTable> TableAnalyzer::tables() const {
    std::vector<FrequencyTable> out;
    for (std::size_t i = 0; i < variables_.size(); ++i) out.push_back(make_frequency_table(variables_[i], counts_[i]));
    return out;
}

nlohmann::json TableAnalyzer::snapshot() const {
    return frequency_json(tables(), k_, k_ == 0 ? 0.0 : static_cast<double>(rows_) / static_cast<double>(k_));
}

std::string TableAnalyzer::render_text() const { return render_frequency_tables(tables(), table_view_); }

std::vector<FrequencyTable> run_table(const DatasetHandle& handle, const SamplingPlan& plan,
                                      const std::vector<std::string>& variables, const TransformProgram& program,
                                      const RunOptions& options) {
    std::vector<std::string> vars = variables;
    if (vars.empty()) {
        for (const auto& [name, role] : program.output_columns(handle.schema)) {
            if (role == Role::qualitative) vars.push_back(name);
        }
    }
    TableAnalyzer analyzer(vars, true);
    run_replicates(handle, plan, program, analyzer, [](std::size_t, TaskState) { return true; }, options);
    return analyzer.tables();
}

// ---------------------------------------------------------------------------
// Correlation

Matrix pearson_matrix(const Frame& frame, const std::vector<std::string>& columns) {
    std::vector<std::vector<double>> data;
    data.reserve(columns.size());
    for (const auto& c : columns) data.push_back(numeric_copy(frame, c));

    const std::size_t p = columns.size();
    Matrix r(p, std::vector<double>(p, kNaN));
    for (std::size_t a = 0; a < p; ++a) {
        r[a][a] = 1.0;
        for (std::size_t b = a + 1; b < p; ++b) {
            const auto& x = data[a];
            const auto& y = data[b];
            double sx = 0, sy = 0;
            std::size_t n = 0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                if (std::isnan(x[i]) || std::isnan(y[i])) continue;
                sx += x[i];
                sy += y[i];
                ++n;
            }
            if (n < 2) continue;
            const double mx = sx / static_cast<double>(n);
            const double my = sy / static_cast<double>(n);
            double sxx = 0, syy = 0, sxy = 0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                if (std::isnan(x[i]) || std::isnan(y[i])) continue;
                const double dx = x[i] - mx;
                const double dy = y[i] - my;
                sxx += dx * dx;
                syy += dy * dy;
                sxy += dx * dy;
            }
            if (sxx > 0 && syy > 0) {
                const double v = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
                r[a][b] = r[b][a] = v;
            }
        }
    }
    return r;
}

CorrAnalyzer::CorrAnalyzer(std::vector<std::string> columns) : columns_(std::move(columns)) {
    if (columns_.size() < 2) throw UsageError("correlation needs at least two columns");
}

std::any CorrAnalyzer::summarize(const ReplicateContext& ctx) const {
    return std::make_pair(static_cast<std::uint64_t>(ctx.frame.rows), pearson_matrix(ctx.frame, columns_));
}

void CorrAnalyzer::merge(std::size_t k, std::any summary) {
    auto s = std::any_cast<std::pair<std::uint64_t, Matrix>>(std::move(summary));
    rows_ += s.first;
    by_k_[k] = std::move(s.second);
}

Matrix CorrAnalyzer::matrix() const {
    const std::size_t p = columns_.size();
    Matrix out(p, std::vector<double>(p, kNaN));
    for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = 0; b < p; ++b) {
            double sum = 0.0;
            std::size_t used = 0;
            for (const auto& [k, m] : by_k_) {
                if (std::isnan(m[a][b])) continue;
                sum += m[a][b];
                ++used;
            }
            if (used > 0) out[a][b] = sum / static_cast<double>(used);
        }
        out[a][a] = 1.0;
    }
    return out;
}

nlohmann::json CorrAnalyzer::snapshot() const {
    const std::size_t k = by_k_.size();
    return {{"columns", columns_},
            {"matrix", matrix()},
            {"k", k},
            {"n", k == 0 ? 0.0 : static_cast<double>(rows_) / static_cast<double>(k)}};
}

std::string CorrAnalyzer::render_text() const {
    std::vector<std::string> header{""};
    header.insert(header.end(), columns_.begin(), columns_.end());
    TextTable t(header);
    const Matrix m = matrix();
    for (std::size_t a = 0; a < columns_.size(); ++a) {
        std::vector<std::string> row{columns_[a]};
        for (double v : m[a]) row.push_back(format_fixed(v, 3));
        t.add_row(std::move(row));
    }
    return t.render();
}

Matrix correlation_matrix(const DatasetHandle& handle, const SamplingPlan& plan,
                          const std::vector<std::string>& columns, const TransformProgram& program,
                          const RunOptions& options) {
    CorrAnalyzer analyzer(columns);
    run_replicates(handle, plan, program, analyzer, [](std::size_t, TaskState) { return true; }, options);
    return analyzer.matrix();
}

// ---------------------------------------------------------------------------
// Variance forecast

VarianceForecast variance_forecast(const expr::Expr& g, double mu, double sigma2, std::optional<double> population,
                                   double n, double k) {
    if (!(n > 0) || !(k > 0)) throw UsageError("n and K must be positive");
    const double h = std::max(1e-6, 1e-6 * std::fabs(mu));
    const double h2 = std::max(1e-4, 1e-4 * std::fabs(mu));
    VarianceForecast f;
    f.g_dot = (expr::evaluate(g, mu + h) - expr::evaluate(g, mu - h)) / (2.0 * h);
    if (!std::isfinite(f.g_dot)) throw UsageError("derivative of g is not finite at mu");
    f.g_ddot = (expr::evaluate(g, mu + h2) - 2.0 * expr::evaluate(g, mu) + expr::evaluate(g, mu - h2)) / (h2 * h2);
    double inv = 1.0 / (n * k);
    if (population && std::isfinite(*population) && *population > 0) inv += 1.0 / *population;
    f.variance = f.g_dot * f.g_dot * sigma2 * inv;
    f.bias = 0.5 * f.g_ddot * sigma2 / n;
    return f;
}

} // namespace pondstat
