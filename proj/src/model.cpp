#include "pondstat/model.hpp"

#include "pondstat/error.hpp"
#include "pondstat/text_table.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace pondstat {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kMaxIterations = 25;
constexpr double kTolerance = 1e-8;
constexpr double kRidge = 1e-8;
constexpr double kRankThreshold = 1e-10;

struct CompleteCases {
    Eigen::MatrixXd x; // rows x p
    Eigen::VectorXd y;
};

CompleteCases complete_cases(const Frame& frame, std::string_view y, const std::vector<std::string>& x) {
    std::vector<std::vector<double>> cols;
    cols.reserve(x.size() + 1);
    cols.push_back(numeric_values(frame.column(y)));
    for (const auto& name : x) cols.push_back(numeric_values(frame.column(name)));

    const std::size_t rows = cols.front().size();
    std::vector<std::size_t> keep;
    keep.reserve(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        bool ok = true;
        for (const auto& c : cols) {
            if (std::isnan(c[r])) {
                ok = false;
                break;
            }
        }
        if (ok) keep.push_back(r);
    }
    CompleteCases cc{Eigen::MatrixXd(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(x.size())),
                     Eigen::VectorXd(static_cast<Eigen::Index>(keep.size()))};
    for (std::size_t i = 0; i < keep.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        cc.y(ii) = cols[0][keep[i]];
        for (std::size_t j = 0; j < x.size(); ++j) cc.x(ii, static_cast<Eigen::Index>(j)) = cols[j + 1][keep[i]];
    }
    return cc;
}

// Centered and scaled regressors with a leading column of ones. Columns that
// are constant or linearly dependent on earlier ones are left out; `used`
// maps design columns 1.. back to x indices.
struct Design {
    Eigen::MatrixXd z;
    std::vector<std::size_t> used;
    std::vector<double> mean;
    std::vector<double> sd;
};

Design standardize(const Eigen::MatrixXd& x, const std::vector<std::string>& names, std::vector<std::string>& warnings) {
    const auto m = x.rows();
    Design d;
    d.mean.assign(static_cast<std::size_t>(x.cols()), kNaN);
    d.sd.assign(static_cast<std::size_t>(x.cols()), kNaN);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double mean = x.col(j).mean();
        const double sd = std::sqrt((x.col(j).array() - mean).square().sum() / static_cast<double>(m));
        const auto jj = static_cast<std::size_t>(j);
        if (!(sd > 0.0) || !std::isfinite(sd)) {
            warnings.push_back("'" + names[jj] + "' is constant in this replicate; its coefficient is not estimable");
            continue;
        }
        d.mean[jj] = mean;
        d.sd[jj] = sd;
        d.used.push_back(jj);
    }

    auto build = [&] {
        d.z.resize(m, static_cast<Eigen::Index>(d.used.size() + 1));
        d.z.col(0).setOnes();
        for (std::size_t c = 0; c < d.used.size(); ++c) {
            const auto j = static_cast<Eigen::Index>(d.used[c]);
            d.z.col(static_cast<Eigen::Index>(c + 1)) = (x.col(j).array() - d.mean[d.used[c]]) / d.sd[d.used[c]];
        }
    };
    build();

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.z);
    qr.setThreshold(kRankThreshold);
    if (qr.rank() < d.z.cols()) {
        const auto& perm = qr.colsPermutation().indices();
        std::set<std::size_t> dependent;
        for (Eigen::Index i = qr.rank(); i < d.z.cols(); ++i) {
            const auto col = static_cast<std::size_t>(perm(i));
            if (col > 0) dependent.insert(col - 1);
        }
        std::vector<std::size_t> kept;
        for (std::size_t c = 0; c < d.used.size(); ++c) {
            if (dependent.contains(c)) {
                warnings.push_back("'" + names[d.used[c]] + "' is collinear with other regressors; its coefficient is not estimable");
            } else {
                kept.push_back(d.used[c]);
            }
        }
        d.used = std::move(kept);
        build();
    }
    return d;
}

// Maps coefficients of the standardized design back to the raw columns.
std::vector<double> back_transform(const Design& d, const Eigen::VectorXd& gamma, std::size_t p) {
    std::vector<double> beta(p + 1, kNaN);
    double intercept = gamma(0);
    for (std::size_t c = 0; c < d.used.size(); ++c) {
        const std::size_t j = d.used[c];
        beta[j] = gamma(static_cast<Eigen::Index>(c + 1)) / d.sd[j];
        intercept -= beta[j] * d.mean[j];
    }
    beta[p] = intercept;
    return beta;
}

double linear_predictor(const std::vector<double>& beta, const std::vector<double>& row) {
    double eta = beta.back();
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (!std::isnan(beta[j])) eta += beta[j] * row[j];
    }
    return eta;
}

void require_binary(const Eigen::VectorXd& y, std::string_view name) {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (y(i) != 0.0 && y(i) != 1.0) {
            throw ModelError("logit needs '" + std::string(name) + "' coded 0/1; found " + std::to_string(y(i)));
        }
    }
}

ReplicateFit discard(std::string why, std::size_t rows) {
    ReplicateFit f;
    f.discarded = true;
    f.rows_used = rows;
    f.goodness = kNaN;
    f.warnings.push_back(std::move(why));
    return f;
}

double mean_finite(const std::vector<double>& v) {
    double s = 0.0;
    std::size_t n = 0;
    for (double x : v) {
        if (std::isfinite(x)) {
            s += x;
            ++n;
        }
    }
    return n == 0 ? kNaN : s / static_cast<double>(n);
}

} // namespace

std::string_view to_string(ModelKind kind) noexcept { return kind == ModelKind::ols ? "ols" : "logit"; }

ReplicateFit fit_ols_replicate(const Frame& frame, std::string_view y, const std::vector<std::string>& x) {
    const CompleteCases cc = complete_cases(frame, y, x);
    const auto m = static_cast<std::size_t>(cc.y.size());
    if (m < x.size() + 2) {
        return discard("only " + std::to_string(m) + " complete rows for " + std::to_string(x.size()) + " regressors", m);
    }
    ReplicateFit fit;
    fit.rows_used = m;
    const Design d = standardize(cc.x, x, fit.warnings);
    const Eigen::VectorXd gamma = d.z.colPivHouseholderQr().solve(cc.y);
    fit.coefficients = back_transform(d, gamma, x.size());

    const double ssr = (cc.y - d.z * gamma).squaredNorm();
    const double sst = (cc.y.array() - cc.y.mean()).square().sum();
    fit.goodness = sst > 0.0 ? std::clamp(1.0 - ssr / sst, 0.0, 1.0) : kNaN;
    return fit;
}

ReplicateFit fit_logit_replicate(const Frame& frame, std::string_view y, const std::vector<std::string>& x,
                                 const Frame& holdout) {
    const CompleteCases cc = complete_cases(frame, y, x);
    require_binary(cc.y, y);
    const auto m = static_cast<std::size_t>(cc.y.size());
    if (m < x.size() + 2) {
        return discard("only " + std::to_string(m) + " complete rows for " + std::to_string(x.size()) + " regressors", m);
    }
    const double positives = cc.y.sum();
    if (positives == 0.0 || positives == static_cast<double>(m)) {
        return discard("'" + std::string(y) + "' has a single class in this replicate", m);
    }

    ReplicateFit fit;
    fit.rows_used = m;
    const Design d = standardize(cc.x, x, fit.warnings);
    const auto c = d.z.cols();
    Eigen::VectorXd gamma = Eigen::VectorXd::Zero(c);
    bool converged = false;
    for (int it = 0; it < kMaxIterations; ++it) {
        const Eigen::ArrayXd eta = (d.z * gamma).array();
        const Eigen::ArrayXd p = 1.0 / (1.0 + (-eta).exp());
        const Eigen::ArrayXd w = p * (1.0 - p);
        Eigen::MatrixXd h = d.z.transpose() * (d.z.array().colwise() * w).matrix();
        h.diagonal().array() += kRidge;
        const Eigen::VectorXd g = d.z.transpose() * (cc.y.array() - p).matrix();
        const Eigen::VectorXd step = h.ldlt().solve(g);
        if (!step.allFinite()) break;
        gamma += step;
        if (step.cwiseAbs().maxCoeff() < kTolerance) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        return discard("logit did not converge in " + std::to_string(kMaxIterations) +
                           " iterations (the classes may be separable)",
                       m);
    }
    fit.coefficients = back_transform(d, gamma, x.size());

    const CompleteCases hold = complete_cases(holdout, y, x);
    require_binary(hold.y, y);
    std::vector<double> scores(static_cast<std::size_t>(hold.y.size()));
    std::vector<double> labels(scores.size());
    std::vector<double> row(x.size());
    for (Eigen::Index i = 0; i < hold.y.size(); ++i) {
        for (std::size_t j = 0; j < x.size(); ++j) row[j] = hold.x(i, static_cast<Eigen::Index>(j));
        scores[static_cast<std::size_t>(i)] = linear_predictor(fit.coefficients, row);
        labels[static_cast<std::size_t>(i)] = hold.y(i);
    }
    const double pos = std::accumulate(labels.begin(), labels.end(), 0.0);
    if (pos == 0.0 || pos == static_cast<double>(labels.size())) {
        fit.goodness = kNaN;
        fit.warnings.push_back("held-out draw has a single class; AUC unavailable for this replicate");
    } else {
        fit.goodness = auc(scores, labels);
    }
    return fit;
}

double normal_p_value(double t) noexcept {
    if (std::isnan(t)) return kNaN;
    return 100.0 * std::erfc(std::fabs(t) / std::sqrt(2.0));
}

RegressionTable aggregate_fits(ModelKind kind, const std::vector<std::string>& terms, std::span<const ReplicateFit> fits,
                               bool partial) {
    std::vector<const ReplicateFit*> usable;
    for (const auto& f : fits) {
        if (f.discarded) continue;
        if (f.coefficients.size() != terms.size()) throw std::logic_error("fit does not match the model terms");
        usable.push_back(&f);
    }
    if (usable.size() < 2 && !partial) {
        throw ModelError("need at least two usable replicate fits, have " + std::to_string(usable.size()));
    }

    RegressionTable table;
    table.kind = kind;
    table.fits = usable.size();
    std::vector<double> goodness;
    for (const auto* f : usable) goodness.push_back(f->goodness);
    table.headline = mean_finite(goodness);

    for (std::size_t j = 0; j < terms.size(); ++j) {
        std::vector<double> v;
        for (const auto* f : usable) {
            if (std::isfinite(f->coefficients[j])) v.push_back(f->coefficients[j]);
        }
        CoefficientRow row;
        row.name = terms[j];
        row.estimate = v.empty() ? kNaN : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        if (v.size() >= 2) {
            double ss = 0.0;
            for (double e : v) ss += (e - row.estimate) * (e - row.estimate);
            const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
            row.stand_err = 100.0 * sd / std::sqrt(static_cast<double>(v.size()));
        } else {
            row.stand_err = kNaN;
        }
        if (std::isnan(row.stand_err) || std::isnan(row.estimate)) {
            row.t_stat = kNaN;
        } else if (row.stand_err == 0.0) {
            row.t_stat = row.estimate == 0.0 ? 0.0 : std::copysign(kTStatSentinel, row.estimate);
        } else {
            row.t_stat = row.estimate / (row.stand_err / 100.0);
        }
        row.p_value = normal_p_value(row.t_stat);
        table.rows.push_back(std::move(row));
    }
    return table;
}

double auc(std::span<const double> scores, std::span<const double> labels) {
    if (scores.size() != labels.size()) throw UsageError("scores and labels differ in length");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum = 0.0;
    double pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t t = i; t <= j; ++t) {
            if (labels[order[t]] != 0.0) {
                rank_sum += avg_rank;
                pos += 1.0;
            }
        }
        i = j + 1;
    }
    const double neg = static_cast<double>(n) - pos;
    if (pos == 0.0 || neg == 0.0) throw UsageError("AUC needs both classes");
    return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

std::string render_regression_table(const RegressionTable& table, double mean_rows) {
    std::string out = "Mean subsample size " + format_fixed(mean_rows, 1) + " over " + std::to_string(table.fits) +
                      " replicate fits";
    if (table.kind == ModelKind::ols) {
        out += ", R-squared " + format_fixed(100.0 * table.headline, 1) + " %\n";
    } else {
        out += "\nOut-of-sample AUC " + format_fixed(100.0 * table.headline, 1) + " %\n";
    }
    out += '\n';
    TextTable t({"", "Estimate", "StandErr", "tStat", "pValue"});
    for (const auto& r : table.rows) {
        t.add_row({r.name, format_fixed(r.estimate, 3), format_fixed(r.stand_err, 3), format_fixed(r.t_stat, 3),
                   format_fixed(r.p_value, 3)});
    }
    out += t.render();
    out += "\n"
           "* Estimate: mean replicate coefficient, in the original units of x\n"
           "* StandErr: replicate standard deviation of the coefficient over sqrt(K), x100\n"
           "* tStat: Estimate / (StandErr / 100)\n"
           "* pValue: two-sided normal-approximation p-value, percent\n";
    return out;
}

nlohmann::json regression_json(const RegressionTable& table, const std::map<std::size_t, ReplicateFit>& fits,
                               std::size_t k, double n) {
    nlohmann::json coefs = nlohmann::json::array();
    for (const auto& r : table.rows) {
        coefs.push_back({{"name", r.name},
                         {"estimate", r.estimate},
                         {"stand_err", r.stand_err},
                         {"t_stat", r.t_stat},
                         {"p_value", r.p_value}});
    }
    nlohmann::json reps = nlohmann::json::array();
    for (const auto& [rk, f] : fits) {
        reps.push_back({{"k", rk},
                        {"rows_used", f.rows_used},
                        {"goodness", f.goodness},
                        {"discarded", f.discarded},
                        {"warnings", f.warnings}});
    }
    return {{"model", to_string(table.kind)},
            {"coefficients", std::move(coefs)},
            {table.kind == ModelKind::ols ? "r2" : "auc", table.headline},
            {"fits", table.fits},
            {"replicates", std::move(reps)},
            {"k", k},
            {"n", n}};
}

std::vector<std::string> ModelDesign::terms() const {
    std::vector<std::string> t = x;
    t.emplace_back(kIntercept);
    return t;
}

ModelDesign resolve_design(const Schema& schema, const TransformProgram& program, const ModelSpec& spec) {
    const auto cols = program.output_columns(schema);
    auto role_of = [&](std::string_view name) -> std::optional<Role> {
        for (const auto& [n, r] : cols) {
            if (n == name) return r;
        }
        return std::nullopt;
    };

    ModelDesign design;
    design.y = spec.y;
    if (spec.y.empty()) throw UsageError("model needs a dependent variable");
    if (spec.y == kIntercept) throw UsageError("_INTERCEPT_ cannot be the dependent variable");
    if (!role_of(spec.y)) throw UsageError("unknown column '" + spec.y + "'");

    std::vector<std::string> requested = spec.x;
    if (requested.empty()) {
        for (const auto& [name, role] : cols) {
            if (role == Role::quantitative && name != spec.y && name != kIntercept) requested.push_back(name);
        }
    }

    std::set<std::string> seen;
    auto add = [&](const std::string& term) {
        if (term == spec.y) throw UsageError("'" + term + "' is both the dependent variable and a regressor");
        if (seen.insert(term).second) design.x.push_back(term);
    };

    for (const auto& name : requested) {
        if (name == kIntercept) continue;
        if (const auto role = role_of(name)) {
            if (*role == Role::quantitative) {
                add(name);
                continue;
            }
            const ColumnSpec* cs = schema.find(name);
            if (cs != nullptr && !cs->levels.empty()) {
                design.auto_dummies.push_back(DummyStep{name, cs->levels});
                for (const auto& level : cs->levels) add(name + "_" + level);
                continue;
            }
            throw UsageError("column '" + name + "' is qualitative; list it in qlist or expand it with ady");
        }
        bool expanded = false;
        for (const auto& step : program.steps()) {
            if (const auto* d = std::get_if<DummyStep>(&step); d != nullptr && d->column == name) {
                for (const auto& level : d->levels) add(name + "_" + level);
                expanded = true;
            }
        }
        if (!expanded) throw UsageError("unknown column '" + name + "'");
    }
    if (design.x.empty()) throw UsageError("model has no regressors");
    return design;
}

ModelAnalyzer::ModelAnalyzer(ModelKind kind, ModelDesign design, std::size_t k_max)
    : kind_(kind), design_(std::move(design)), k_max_(k_max) {}

std::any ModelAnalyzer::summarize(const ReplicateContext& ctx) const {
    auto prepare = [&](Frame f) {
        for (const auto& d : design_.auto_dummies) f = expand_dummies(std::move(f), d.column, d.levels);
        return f;
    };
    if (kind_ == ModelKind::ols) {
        if (design_.auto_dummies.empty()) return fit_ols_replicate(ctx.frame, design_.y, design_.x);
        return fit_ols_replicate(prepare(ctx.frame), design_.y, design_.x);
    }
    const Frame holdout = prepare(ctx.draw_holdout());
    if (design_.auto_dummies.empty()) return fit_logit_replicate(ctx.frame, design_.y, design_.x, holdout);
    return fit_logit_replicate(prepare(ctx.frame), design_.y, design_.x, holdout);
}

void ModelAnalyzer::merge(std::size_t k, std::any summary) {
    auto fit = std::any_cast<ReplicateFit>(std::move(summary));
    const bool dropped = fit.discarded;
    std::string why = dropped && !fit.warnings.empty() ? fit.warnings.front() : std::string();
    fits_[k] = std::move(fit);
    if (dropped && 2 * ++discarded_ > k_max_) {
        throw ModelError("more than half of the replicates were discarded (last: " + why + ")");
    }
}

RegressionTable ModelAnalyzer::table(bool partial) const {
    std::vector<ReplicateFit> list;
    list.reserve(fits_.size());
    for (const auto& [k, f] : fits_) list.push_back(f);
    return aggregate_fits(kind_, design_.terms(), list, partial);
}

namespace {

double mean_rows_used(const std::map<std::size_t, ReplicateFit>& fits) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& [k, f] : fits) {
        if (f.discarded) continue;
        s += static_cast<double>(f.rows_used);
        ++n;
    }
    return n == 0 ? 0.0 : s / static_cast<double>(n);
}

} // namespace

nlohmann::json ModelAnalyzer::snapshot() const {
    return regression_json(table(true), fits_, fits_.size(), mean_rows_used(fits_));
}

std::string ModelAnalyzer::render_text() const { return render_regression_table(table(true), mean_rows_used(fits_)); }

std::vector<std::string> ModelAnalyzer::warnings() const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& [k, f] : fits_) {
        for (const auto& w : f.warnings) {
            if (seen.insert(w).second) out.push_back(w);
        }
    }
    return out;
}

RegressionTable run_model(const DatasetHandle& handle, const SamplingPlan& plan, const ModelSpec& spec,
                          const TransformProgram& program, const RunOptions& options) {
    ModelAnalyzer analyzer(spec.kind, resolve_design(handle.schema, program, spec), plan.k_max);
    run_replicates(handle, plan, program, analyzer, [](std::size_t, TaskState) { return true; }, options);
    return analyzer.table(false);
}

} // namespace pondstat
