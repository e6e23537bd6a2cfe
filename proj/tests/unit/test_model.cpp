#include "pondstat/error.hpp"
#include "pondstat/model.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace pondstat;
using testsupport::make_frame;
using testsupport::qual;
using testsupport::quant;

namespace {

// Closed-form simple regression y = a + b x.
std::pair<double, double> simple_ols(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= x.size();
    my /= y.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    const double b = sxy / sxx;
    return {my - b * mx, b};
}

double brute_auc(const std::vector<double>& s, const std::vector<double>& y) {
    double wins = 0, pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            if (y[i] == 1 && y[j] == 0) {
                pairs += 1;
                wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
            }
    return wins / pairs;
}

} // namespace

TEST(Ols, MatchesClosedForm) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> d;
    std::vector<double> x, y;
    for (int i = 0; i < 300; ++i) {
        x.push_back(1000 + 50 * d(rng));
        y.push_back(3 - 0.02 * x.back() + d(rng));
    }
    std::vector<double> ones(300, 1.0);
    const auto fit = fit_ols_replicate(make_frame({quant("x", x), quant("y", y), quant(std::string(kIntercept), ones)}), "y", {"x"});
    const auto [a, b] = simple_ols(x, y);
    ASSERT_EQ(fit.coefficients.size(), 2u);
    EXPECT_NEAR(fit.coefficients[0], b, 1e-10);
    EXPECT_NEAR(fit.coefficients[1], a, 1e-8);
    EXPECT_EQ(fit.rows_used, 300u);
    EXPECT_GT(fit.goodness, 0.0);
    EXPECT_LE(fit.goodness, 1.0);
}

TEST(Ols, CompleteCasesAndConstantColumn) {
    const auto frame = make_frame({quant("x", {1, 2, std::nan(""), 4, 5}), quant("c", {7, 7, 7, 7, 7}),
                                   quant("y", {2, 4, 100, 8, 10}), quant(std::string(kIntercept), {1, 1, 1, 1, 1})});
    const auto fit = fit_ols_replicate(frame, "y", {"x", "c"});
    EXPECT_EQ(fit.rows_used, 4u);
    EXPECT_FALSE(fit.discarded);
    EXPECT_NEAR(fit.coefficients[0], 2.0, 1e-10);
    EXPECT_TRUE(std::isnan(fit.coefficients[1]));
    EXPECT_NEAR(fit.coefficients[2], 0.0, 1e-9);
    EXPECT_FALSE(fit.warnings.empty());
    EXPECT_NEAR(fit.goodness, 1.0, 1e-12);
}

TEST(Logit, MatchesNewtonOracle) {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> d;
    std::uniform_real_distribution<double> u;
    const std::size_t n = 500;
    std::vector<double> x1, x2, y, ones(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        x1.push_back(d(rng));
        x2.push_back(2 * d(rng) + 1);
        const double eta = 0.3 + x1.back() - 0.5 * x2.back();
        y.push_back(u(rng) < 1 / (1 + std::exp(-eta)) ? 1.0 : 0.0);
    }
    // Unscaled Newton on [x1, x2, 1].
    double beta[3] = {0, 0, 0};
    for (int it = 0; it < 100; ++it) {
        double g[3] = {0, 0, 0}, H[3][3] = {};
        for (std::size_t i = 0; i < n; ++i) {
            const double r[3] = {x1[i], x2[i], 1.0};
            const double p = 1 / (1 + std::exp(-(beta[0] * r[0] + beta[1] * r[1] + beta[2] * r[2])));
            for (int a = 0; a < 3; ++a) {
                g[a] += (y[i] - p) * r[a];
                for (int b = 0; b < 3; ++b) H[a][b] += p * (1 - p) * r[a] * r[b];
            }
        }
        // Cramer's rule for the 3x3 step.
        auto det = [](double m[3][3]) {
            return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                   m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        };
        const double D = det(H);
        for (int c = 0; c < 3; ++c) {
            double M[3][3];
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) M[a][b] = b == c ? g[a] : H[a][b];
            beta[c] += det(M) / D;
        }
    }
    const auto frame = make_frame({quant("x1", x1), quant("x2", x2), quant("y", y), quant(std::string(kIntercept), ones)});
    const auto fit = fit_logit_replicate(frame, "y", {"x1", "x2"}, frame);
    ASSERT_FALSE(fit.discarded);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(fit.coefficients[c], beta[c], 1e-6) << c;

    std::vector<double> score;
    for (std::size_t i = 0; i < n; ++i) score.push_back(beta[0] * x1[i] + beta[1] * x2[i] + beta[2]);
    EXPECT_NEAR(fit.goodness, brute_auc(score, y), 1e-9);
}

TEST(Logit, RejectsNonBinaryAndSingleClass) {
    const auto bad = make_frame({quant("x", {1, 2, 3}), quant("y", {0, 2, 1}), quant(std::string(kIntercept), {1, 1, 1})});
    EXPECT_THROW(fit_logit_replicate(bad, "y", {"x"}, bad), ModelError);
    const auto one = make_frame({quant("x", {1, 2, 3}), quant("y", {1, 1, 1}), quant(std::string(kIntercept), {1, 1, 1})});
    EXPECT_TRUE(fit_logit_replicate(one, "y", {"x"}, one).discarded);
}

TEST(Auc, RankSumWithTies) {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> pick(0, 20);
    std::vector<double> s, y;
    for (int i = 0; i < 400; ++i) {
        s.push_back(pick(rng));
        y.push_back((pick(rng) + s.back()) > 20 ? 1 : 0);
    }
    EXPECT_NEAR(auc(s, y), brute_auc(s, y), 1e-12);
    const std::vector<double> same = {1, 1, 1};
    const std::vector<double> labels = {1, 1, 1};
    EXPECT_THROW(auc(same, labels), UsageError);
}

TEST(Aggregate, InferenceIdentities) {
    std::vector<ReplicateFit> fits;
    for (double b : {1.0, 1.2, 0.8, 1.1}) {
        ReplicateFit f;
        f.coefficients = {b, 5.0};
        f.goodness = 0.5;
        f.rows_used = 10;
        fits.push_back(f);
    }
    ReplicateFit dropped;
    dropped.discarded = true;
    fits.push_back(dropped);
    const auto t = aggregate_fits(ModelKind::ols, {"x", std::string(kIntercept)}, fits);
    EXPECT_EQ(t.fits, 4u);
    const double mean = 1.025;
    const double sd = std::sqrt(((1 - mean) * (1 - mean) + (1.2 - mean) * (1.2 - mean) + (0.8 - mean) * (0.8 - mean) +
                                 (1.1 - mean) * (1.1 - mean)) /
                                3);
    EXPECT_NEAR(t.rows[0].estimate, mean, 1e-12);
    EXPECT_NEAR(t.rows[0].stand_err, 100 * sd / 2, 1e-10);
    EXPECT_NEAR(t.rows[0].t_stat * t.rows[0].stand_err / 100, t.rows[0].estimate, 1e-12);
    EXPECT_NEAR(t.rows[0].p_value, normal_p_value(t.rows[0].t_stat), 1e-12);
    EXPECT_EQ(t.rows[1].stand_err, 0.0);
    EXPECT_EQ(t.rows[1].t_stat, kTStatSentinel);
    EXPECT_DOUBLE_EQ(t.headline, 0.5);

    EXPECT_THROW(aggregate_fits(ModelKind::ols, {"x", std::string(kIntercept)}, std::span(fits).first(1)), ModelError);
    EXPECT_TRUE(std::isnan(aggregate_fits(ModelKind::ols, {"x", std::string(kIntercept)}, std::span(fits).first(1), true).rows[0].stand_err));
}

TEST(Aggregate, PValueMonotoneAndBounded) {
    EXPECT_DOUBLE_EQ(normal_p_value(0.0), 100.0);
    EXPECT_NEAR(normal_p_value(1.959963984540054), 5.0, 1e-9);
    EXPECT_EQ(normal_p_value(-2.0), normal_p_value(2.0));
    EXPECT_LT(normal_p_value(3.0), normal_p_value(2.0));
}

TEST(Design, DefaultsAndDummies) {
    Codebook cb;
    cb.qlist = {"y", "a", "b"};
    cb.scale_level["d"] = {"1", "2", "3"};
    const auto schema = Schema::from_codebook({"y", "a", "b", "d", "s"}, cb);
    const auto all = resolve_design(schema, {}, ModelSpec{ModelKind::ols, "y", {}});
    EXPECT_EQ(all.x, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(all.terms().back(), kIntercept);

    const auto dummies = resolve_design(schema, {}, ModelSpec{ModelKind::ols, "y", {"a", "d"}});
    EXPECT_EQ(dummies.x, (std::vector<std::string>{"a", "d_1", "d_2", "d_3"}));
    ASSERT_EQ(dummies.auto_dummies.size(), 1u);

    TransformProgram p;
    p.add_dummies("s", {"u", "v"});
    const auto expanded = resolve_design(schema, p, ModelSpec{ModelKind::ols, "y", {"s"}});
    EXPECT_EQ(expanded.x, (std::vector<std::string>{"s_u", "s_v"}));

    EXPECT_THROW(resolve_design(schema, {}, ModelSpec{ModelKind::ols, "y", {"s"}}), UsageError);
    EXPECT_THROW(resolve_design(schema, {}, ModelSpec{ModelKind::ols, "zz", {}}), UsageError);
}

TEST(RegressionOutput, TextAndJson) {
    std::vector<ReplicateFit> fits(3);
    for (std::size_t i = 0; i < 3; ++i) {
        fits[i].coefficients = {0.5 + 0.1 * i, 1.0};
        fits[i].goodness = 0.25;
        fits[i].rows_used = 100;
    }
    const auto t = aggregate_fits(ModelKind::ols, {"x", std::string(kIntercept)}, fits);
    const auto text = render_regression_table(t, 100);
    for (const char* h : {"Estimate", "StandErr", "tStat", "pValue", "x", "_INTERCEPT_"}) {
        EXPECT_NE(text.find(h), std::string::npos) << h;
    }
    std::map<std::size_t, ReplicateFit> by_k = {{1, fits[0]}, {2, fits[1]}, {3, fits[2]}};
    const auto j = regression_json(t, by_k, 3, 100);
    EXPECT_EQ(j["model"], "ols");
    EXPECT_EQ(j["replicates"].size(), 3u);
    EXPECT_DOUBLE_EQ(j["r2"].get<double>(), 0.25);
}
