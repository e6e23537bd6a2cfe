#pragma once

#include "pondstat/engine.hpp"
#include "pondstat/frame.hpp"
#include "pondstat/transform.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pondstat {

enum class ModelKind { ols, logit };

std::string_view to_string(ModelKind kind) noexcept;

/// `y ~ x1,x2,...`; an empty x list means every quantitative column but y.
struct ModelSpec {
    ModelKind kind = ModelKind::ols;
    std::string y;
    std::vector<std::string> x;
};

/// One replicate's fit. Coefficients are on the original column scale and
/// follow the term order of the design, intercept last. A coefficient that
/// could not be identified (constant or collinear column) is NaN.
struct ReplicateFit {
    std::vector<double> coefficients;
    double goodness = 0.0; // R^2 for OLS, held-out AUC for logit
    std::size_t rows_used = 0;
    bool discarded = false;
    std::vector<std::string> warnings;
};

ReplicateFit fit_ols_replicate(const Frame& frame, std::string_view y, const std::vector<std::string>& x);

/// IRLS on standardized x; at most 25 iterations, stops when max |step| < 1e-8.
/// AUC is measured on `holdout` with the fitted linear predictor as score.
ReplicateFit fit_logit_replicate(const Frame& frame, std::string_view y, const std::vector<std::string>& x,
                                 const Frame& holdout);

struct CoefficientRow {
    std::string name;
    double estimate = 0.0;
    double stand_err = 0.0; // x100
    double t_stat = 0.0;
    double p_value = 0.0; // percent
};

struct RegressionTable {
    ModelKind kind = ModelKind::ols;
    std::vector<CoefficientRow> rows;
    double headline = 0.0; // mean R^2 or AUC, as a fraction
    std::size_t fits = 0;
};

/// Stand-in for an infinite tStat when the coefficient has zero spread.
inline constexpr double kTStatSentinel = 1e9;

/// 100 * 2 * (1 - Phi(|t|)).
double normal_p_value(double t) noexcept;

/// Averages the non-discarded fits. `terms` names the coefficients (intercept
/// last). Throws ModelError with fewer than two usable fits unless `partial`
/// is set, in which case spreads are NaN.
RegressionTable aggregate_fits(ModelKind kind, const std::vector<std::string>& terms, std::span<const ReplicateFit> fits,
                               bool partial = false);

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Throws UsageError unless both classes are present.
double auc(std::span<const double> scores, std::span<const double> labels);

std::string render_regression_table(const RegressionTable& table, double mean_rows);
nlohmann::json regression_json(const RegressionTable& table, const std::map<std::size_t, ReplicateFit>& fits,
                               std::size_t k, double n);

/// Regressors after dummy handling. A qualitative x with declared levels is
/// expanded automatically; a name that an `ady` step already expanded stands
/// for its dummies.
struct ModelDesign {
    std::string y;
    std::vector<std::string> x;
    std::vector<DummyStep> auto_dummies;

    /// x followed by the intercept.
    [[nodiscard]] std::vector<std::string> terms() const;
};

ModelDesign resolve_design(const Schema& schema, const TransformProgram& program, const ModelSpec& spec);

class ModelAnalyzer final : public Analyzer {
public:
    ModelAnalyzer(ModelKind kind, ModelDesign design, std::size_t k_max);

    std::string_view kind() const noexcept override { return to_string(kind_); }
    std::any summarize(const ReplicateContext& ctx) const override;
    /// Throws ModelError once more than half of the planned replicates are discarded.
    void merge(std::size_t k, std::any summary) override;
    nlohmann::json snapshot() const override;
    std::string render_text() const override;

    [[nodiscard]] RegressionTable table(bool partial = true) const;
    [[nodiscard]] const std::map<std::size_t, ReplicateFit>& fits() const noexcept { return fits_; }
    [[nodiscard]] const ModelDesign& design() const noexcept { return design_; }
    [[nodiscard]] std::vector<std::string> warnings() const;

private:
    ModelKind kind_;
    ModelDesign design_;
    std::size_t k_max_;
    std::size_t discarded_ = 0;
    std::map<std::size_t, ReplicateFit> fits_;
};

RegressionTable run_model(const DatasetHandle& handle, const SamplingPlan& plan, const ModelSpec& spec,
                          const TransformProgram& program = {}, const RunOptions& options = {});

} // namespace pondstat
