#pragma once

#include "pondstat/engine.hpp"
#include "pondstat/expr.hpp"
#include "pondstat/frame.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pondstat {

/// Descriptive moments of one column in one replicate. Central moments are
/// divided by the valid count. Everything is NaN when no cell is valid.
struct MomentSet {
    std::size_t count_valid = 0;
    std::size_t missing_count = 0;
    double mean = 0.0;
    double m2 = 0.0;
    double m3 = 0.0;
    double m4 = 0.0;
    double min = 0.0;
    double median = 0.0;
    double max = 0.0;

    [[nodiscard]] double stddev() const noexcept;
    /// m3 / m2^1.5, zero when m2 == 0.
    [[nodiscard]] double skew() const noexcept;
    /// Non-excess kurtosis m4 / m2^2, zero when m2 == 0.
    [[nodiscard]] double kurt() const noexcept;
    /// Share of missing cells over all rows, in percent.
    [[nodiscard]] double missing_percent() const noexcept;
};

MomentSet moments_of(std::span<const double> values);

/// Throws UsageError for a qualitative or unknown column.
MomentSet column_moments(const Frame& frame, std::string_view column);

/// One line of the statistics table. `se` is in display units (x100).
struct StatRow {
    std::string column;
    double mu = 0, se = 0, std = 0, min = 0, med = 0, max = 0, skew = 0, kurt = 0, mp = 0;
};

struct StatsOptions {
    /// When set, SE includes the finite-population term: Std * sqrt(1/N + 1/(n k)).
    std::optional<double> population_size;
};

/// Cross-replicate aggregate of per-column moments. Replicates are kept by
/// index and reduced in index order, so merge order does not change a bit.
class StatsAggregate {
public:
    explicit StatsAggregate(std::vector<std::string> columns, StatsOptions options = {});

    void merge(std::size_t k, std::size_t rows, std::vector<MomentSet> moments);

    [[nodiscard]] std::size_t replicates() const noexcept { return by_k_.size(); }
    [[nodiscard]] double mean_rows() const noexcept;
    [[nodiscard]] const std::vector<std::string>& columns() const noexcept { return columns_; }
    [[nodiscard]] std::vector<StatRow> table() const;

private:
    struct Replicate {
        std::size_t rows = 0;
        std::vector<MomentSet> moments;
    };
    std::vector<std::string> columns_;
    StatsOptions options_;
    std::map<std::size_t, Replicate> by_k_;
};

std::string render_stats_table(const std::vector<StatRow>& rows);
nlohmann::json stats_json(const std::vector<StatRow>& rows, std::size_t k, double n);

/// Columns `stats` reports by default: the quantitative ones; when nothing
/// but `_INTERCEPT_` is quantitative, every column (numeric triage by mp).
std::vector<std::string> default_stats_columns(const DatasetHandle& handle, const TransformProgram& program);

class StatsAnalyzer final : public Analyzer {
public:
    explicit StatsAnalyzer(std::vector<std::string> columns, StatsOptions options = {});

    std::string_view kind() const noexcept override { return "stats"; }
    std::any summarize(const ReplicateContext& ctx) const override;
    void merge(std::size_t k, std::any summary) override;
    nlohmann::json snapshot() const override;
    std::string render_text() const override;
    bool se_below(double target) const override;

    [[nodiscard]] const StatsAggregate& aggregate() const noexcept { return aggregate_; }

private:
    StatsAggregate aggregate_;
};

/// Runs the statistics task; `on_update` sees the aggregate after every
/// replicate. Returns the final table.
std::vector<StatRow> run_stats(const DatasetHandle& handle, const SamplingPlan& plan,
                               const std::vector<std::string>& columns, const TransformProgram& program,
                               const std::function<void(std::size_t, const StatsAggregate&)>& on_update = {},
                               const RunOptions& options = {});

// ---------------------------------------------------------------------------
// Frequency tables

struct LevelCount {
    std::string level; // "nan" for missing
    std::uint64_t count = 0;
    double percent = 0.0;
};

struct FrequencyTable {
    static constexpr std::size_t kDisplayLimit = 100;

    std::string variable;
    std::vector<LevelCount> levels; // every level, count descending
    std::uint64_t total = 0;

    [[nodiscard]] std::size_t levels_discovered() const noexcept { return levels.size(); }
    [[nodiscard]] bool capped() const noexcept { return levels.size() > kDisplayLimit; }
};

/// Level counts of one frame's column (any role; numbers use their shortest text).
std::map<std::string, std::uint64_t> count_levels(const Frame& frame, std::string_view column);

FrequencyTable make_frequency_table(std::string variable, const std::map<std::string, std::uint64_t>& counts);

std::string render_frequency_tables(const std::vector<FrequencyTable>& tables, bool table_view);
nlohmann::json frequency_json(const std::vector<FrequencyTable>& tables, std::size_t k, double n);

class TableAnalyzer final : public Analyzer {
public:
    TableAnalyzer(std::vector<std::string> variables, bool table_view);

    std::string_view kind() const noexcept override { return "table"; }
    std::any summarize(const ReplicateContext& ctx) const override;
    void merge(std::size_t k, std::any summary) override;
    nlohmann::json snapshot() const override;
    std::string render_text() const override;

    [[nodiscard]] std::vector<FrequencyTable> tables() const;

private:
    std::vector<std::string> variables_;
    bool table_view_;
    std::size_t k_ = 0;
    std::uint64_t rows_ = 0;
    std::vector<std::map<std::string, std::uint64_t>> counts_;
};

/// Pools level counts over the plan's replicates. Empty `variables` means
/// every qualitative column.
std::vector<FrequencyTable> run_table(const DatasetHandle& handle, const SamplingPlan& plan,
                                      const std::vector<std::string>& variables, const TransformProgram& program = {},
                                      const RunOptions& options = {});

// ---------------------------------------------------------------------------
// Correlation

using Matrix = std::vector<std::vector<double>>;

/// Pearson correlations of one frame over pairwise-complete rows. The
/// diagonal is 1; pairs involving a constant column are NaN.
Matrix pearson_matrix(const Frame& frame, const std::vector<std::string>& columns);

class CorrAnalyzer final : public Analyzer {
public:
    explicit CorrAnalyzer(std::vector<std::string> columns);

    std::string_view kind() const noexcept override { return "corr"; }
    std::any summarize(const ReplicateContext& ctx) const override;
    void merge(std::size_t k, std::any summary) override;
    nlohmann::json snapshot() const override;
    std::string render_text() const override;

    /// Average over replicates of the per-replicate matrices (NaN entries skipped).
    [[nodiscard]] Matrix matrix() const;
    [[nodiscard]] const std::vector<std::string>& columns() const noexcept { return columns_; }

private:
    std::vector<std::string> columns_;
    std::uint64_t rows_ = 0;
    std::map<std::size_t, Matrix> by_k_;
};

Matrix correlation_matrix(const DatasetHandle& handle, const SamplingPlan& plan,
                          const std::vector<std::string>& columns, const TransformProgram& program = {},
                          const RunOptions& options = {});

// ---------------------------------------------------------------------------
// Variance forecast for theta_bar = mean_k g(mu_hat_k)

struct VarianceForecast {
    double g_dot = 0.0;  // central difference
    double g_ddot = 0.0; // second difference, for the O(1/n) bias term
    double variance = 0.0;
    /// 0.5 * g''(mu) * sigma^2 / n, the leading bias of theta_bar.
    double bias = 0.0;
};

/// var(theta_bar) ~= g'(mu)^2 sigma^2 (1/N + 1/(nK)); an absent or infinite
/// N drops the 1/N term. Throws UsageError when g' is not finite at mu.
VarianceForecast variance_forecast(const expr::Expr& g, double mu, double sigma2, std::optional<double> population,
                                   double n, double k);

} // namespace pondstat
