#include "pondstat/error.hpp"
#include "pondstat/stats.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <numeric>
#include <random>

using namespace pondstat;
using testsupport::make_frame;
using testsupport::qual;
using testsupport::quant;
using testsupport::TempDir;

TEST(Moments, BruteForce) {
    const std::vector<double> v = {3, 1, std::nan(""), 4, 1, 5, 9, 2, 6};
    const MomentSet m = moments_of(v);
    EXPECT_EQ(m.count_valid, 8u);
    EXPECT_EQ(m.missing_count, 1u);
    const double mean = 31.0 / 8.0;
    double m2 = 0, m3 = 0, m4 = 0;
    for (double x : {3., 1., 4., 1., 5., 9., 2., 6.}) {
        m2 += std::pow(x - mean, 2) / 8;
        m3 += std::pow(x - mean, 3) / 8;
        m4 += std::pow(x - mean, 4) / 8;
    }
    EXPECT_DOUBLE_EQ(m.mean, mean);
    EXPECT_NEAR(m.m2, m2, 1e-12);
    EXPECT_NEAR(m.skew(), m3 / std::pow(m2, 1.5), 1e-12);
    EXPECT_NEAR(m.kurt(), m4 / (m2 * m2), 1e-12);
    EXPECT_EQ(m.min, 1.0);
    EXPECT_EQ(m.max, 9.0);
    EXPECT_EQ(m.median, 3.5);
    EXPECT_NEAR(m.missing_percent(), 100.0 / 9.0, 1e-12);
}

TEST(Moments, EmptyAndConstant) {
    const std::vector<double> none = {std::nan(""), std::nan("")};
    const MomentSet e = moments_of(none);
    EXPECT_EQ(e.count_valid, 0u);
    EXPECT_TRUE(std::isnan(e.mean));
    EXPECT_EQ(e.missing_percent(), 100.0);
    const std::vector<double> same = {2, 2, 2};
    const MomentSet c = moments_of(same);
    EXPECT_EQ(c.stddev(), 0.0);
    EXPECT_EQ(c.skew(), 0.0);
    EXPECT_EQ(c.kurt(), 0.0);
}

TEST(Moments, QualitativeColumnRejected) {
    const Frame f = make_frame({qual("g", {"a"})});
    EXPECT_THROW(column_moments(f, "g"), UsageError);
    EXPECT_THROW(column_moments(f, "zz"), UsageError);
}

TEST(StatsAggregate, StandardErrorUsesTotalRows) {
    StatsAggregate agg({"v"});
    agg.merge(2, 100, {moments_of(std::vector<double>{0, 2})});
    agg.merge(1, 300, {moments_of(std::vector<double>{0, 4})});
    const auto rows = agg.table();
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_DOUBLE_EQ(rows[0].mu, 1.5);
    EXPECT_DOUBLE_EQ(rows[0].std, 1.5);
    EXPECT_DOUBLE_EQ(rows[0].se, 100.0 * 1.5 / std::sqrt(400.0));
    EXPECT_DOUBLE_EQ(agg.mean_rows(), 200.0);

    StatsAggregate fin({"v"}, StatsOptions{1000.0});
    fin.merge(1, 300, {moments_of(std::vector<double>{0, 4})});
    EXPECT_DOUBLE_EQ(fin.table()[0].se, 100.0 * 2.0 * std::sqrt(1.0 / 1000 + 1.0 / 300));
}

TEST(StatsAggregate, MergeOrderIrrelevant) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> d;
    std::vector<std::vector<double>> reps(9);
    for (auto& r : reps)
        for (int i = 0; i < 50; ++i) r.push_back(d(rng));
    StatsAggregate a({"v"}), b({"v"});
    for (std::size_t k = 0; k < reps.size(); ++k) a.merge(k + 1, 50, {moments_of(reps[k])});
    for (std::size_t k = reps.size(); k-- > 0;) b.merge(k + 1, 50, {moments_of(reps[k])});
    EXPECT_EQ(stats_json(a.table(), 9, 50).dump(), stats_json(b.table(), 9, 50).dump());
}

TEST(StatsTable, RenderAndJson) {
    StatsAggregate agg({"DepDelay"});
    agg.merge(1, 4, {moments_of(std::vector<double>{1, 2, 3, 4})});
    const std::string text = render_stats_table(agg.table());
    for (const char* h : {"Mu", "SE", "Std", "Min", "Med", "Max", "Skew", "Kurt", "mp", "DepDelay"}) {
        EXPECT_NE(text.find(h), std::string::npos) << h;
    }
    const auto j = stats_json(agg.table(), 1, 4);
    EXPECT_EQ(j["k"], 1);
    ASSERT_EQ(j["stats"].size(), 1u);
    EXPECT_EQ(j["stats"][0]["column"], "DepDelay");
    EXPECT_DOUBLE_EQ(j["stats"][0]["mu"].get<double>(), 2.5);
}

TEST(Frequency, CountsAndOrder) {
    const Frame f = make_frame({qual("g", {"b", "a", "b", std::nullopt, "c", "b", "a"})});
    const auto counts = count_levels(f, "g");
    EXPECT_EQ(counts.at("b"), 3u);
    EXPECT_EQ(counts.at("nan"), 1u);
    const auto t = make_frequency_table("g", counts);
    EXPECT_EQ(t.total, 7u);
    ASSERT_EQ(t.levels_discovered(), 4u);
    EXPECT_EQ(t.levels[0].level, "b");
    EXPECT_EQ(t.levels[1].level, "a");
    EXPECT_NEAR(t.levels[0].percent, 300.0 / 7.0, 1e-12);
    const std::string text = render_frequency_tables({t}, true);
    EXPECT_NE(text.find("[ 0 ] levels discovered for g: 4"), std::string::npos) << text;
}

TEST(Frequency, DisplayCap) {
    std::map<std::string, std::uint64_t> counts;
    for (int i = 0; i < 150; ++i) counts[std::to_string(i)] = 1 + i;
    const auto t = make_frequency_table("x", counts);
    EXPECT_TRUE(t.capped());
    EXPECT_EQ(t.levels.front().level, "149");
    const auto j = frequency_json({t}, 1, 10)["tables"][0];
    EXPECT_EQ(j["levels"].size(), FrequencyTable::kDisplayLimit);
    EXPECT_EQ(j["levels_discovered"], 150);
    EXPECT_TRUE(j["capped"].get<bool>());
}

TEST(Correlation, PearsonPairwiseComplete) {
    const Frame f = make_frame({quant("a", {1, 2, 3, 4, std::nan("")}), quant("b", {2, 4, 6, 8, 1}),
                                quant("c", {4, 3, 2, 1, 0}), quant("k", {5, 5, 5, 5, 5})});
    const Matrix m = pearson_matrix(f, {"a", "b", "c", "k"});
    EXPECT_NEAR(m[0][1], 1.0, 1e-12);
    EXPECT_NEAR(m[0][2], -1.0, 1e-12);
    EXPECT_TRUE(std::isnan(m[0][3]));
    EXPECT_EQ(m[3][3], 1.0);
    EXPECT_EQ(m[1][0], m[0][1]);
}

TEST(VarianceForecast, LinearAndQuadratic) {
    const auto lin = variance_forecast(expr::parse("2*x + 1"), 3.0, 4.0, std::nullopt, 100, 10);
    EXPECT_NEAR(lin.g_dot, 2.0, 1e-8);
    EXPECT_NEAR(lin.variance, 4.0 * 4.0 / 1000.0, 1e-9);
    EXPECT_NEAR(lin.bias, 0.0, 1e-6);
    const auto sq = variance_forecast(expr::parse("x^2"), 3.0, 4.0, 1e4, 100, 10);
    EXPECT_NEAR(sq.g_dot, 6.0, 1e-6);
    EXPECT_NEAR(sq.g_ddot, 2.0, 1e-4);
    EXPECT_NEAR(sq.variance, 36.0 * 4.0 * (1e-4 + 1e-3), 1e-6);
    EXPECT_NEAR(sq.bias, 0.5 * 2.0 * 4.0 / 100.0, 1e-5);
    EXPECT_THROW(variance_forecast(expr::parse("log(x)"), -1.0, 1.0, std::nullopt, 10, 1), UsageError);
}

namespace {

DatasetHandle two_columns(const TempDir& dir, std::size_t rows) {
    testsupport::write_csv(dir / "d.csv", "a,g", rows, [](std::size_t i) {
        return std::to_string(i % 97) + "," + (i % 3 == 0 ? "x" : "y");
    });
    return testsupport::open_with_qlist(dir / "d.csv", {"a"});
}

} // namespace

TEST(RunStats, FullCoverageMatchesColumn) {
    TempDir dir;
    const auto h = two_columns(dir, 5000);
    SamplingPlan p;
    p.n = 5000;
    p.sequential = true;
    const auto rows = run_stats(h, p, {"a"}, {});
    std::vector<double> all;
    for (std::size_t i = 0; i < 5000; ++i) all.push_back(static_cast<double>(i % 97));
    const MomentSet m = moments_of(all);
    EXPECT_NEAR(rows[0].mu, m.mean, 1e-9 * std::abs(m.mean));
    EXPECT_NEAR(rows[0].std, m.stddev(), 1e-9 * m.stddev());
    EXPECT_DOUBLE_EQ(rows[0].se, 100.0 * rows[0].std / std::sqrt(5000.0));
}

TEST(RunStats, ThreadCountDoesNotChangeResult) {
    TempDir dir;
    const auto h = two_columns(dir, 3000);
    SamplingPlan p;
    p.n = 200;
    p.k_max = 12;
    p.master_seed = 8;
    const auto serial = stats_json(run_stats(h, p, {"a"}, {}, {}, RunOptions{1}), 12, 200).dump();
    const auto parallel = stats_json(run_stats(h, p, {"a"}, {}, {}, RunOptions{4}), 12, 200).dump();
    EXPECT_EQ(serial, parallel);
}

TEST(Engine, StopsOnStandardErrorTarget) {
    TempDir dir;
    const auto h = two_columns(dir, 3000);
    SamplingPlan p;
    p.n = 100;
    p.k_max = 500;
    p.se_target = 100.0;
    StatsAnalyzer a({"a"});
    std::size_t last = 0;
    const auto state = run_replicates(h, p, {}, a, [&](std::size_t k, TaskState) {
        last = k;
        return true;
    });
    EXPECT_EQ(state, TaskState::stopped_by_se);
    EXPECT_LT(last, 500u);
    EXPECT_LT(a.aggregate().table()[0].se, 100.0);

    p.se_target.reset();
    p.k_max = 3;
    StatsAnalyzer b({"a"});
    EXPECT_EQ(run_replicates(h, p, {}, b, [](std::size_t, TaskState) { return true; }), TaskState::stopped_by_k);
    EXPECT_EQ(b.aggregate().replicates(), 3u);
}

TEST(Engine, CancelAndCallbackOrder) {
    TempDir dir;
    const auto h = two_columns(dir, 3000);
    SamplingPlan p;
    p.n = 50;
    p.k_max = 40;
    StatsAnalyzer a({"a"});
    std::vector<std::size_t> seen;
    const auto state = run_replicates(
        h, p, {}, a,
        [&](std::size_t k, TaskState) {
            seen.push_back(k);
            return k < 5;
        },
        RunOptions{3});
    EXPECT_EQ(state, TaskState::cancelled);
    EXPECT_EQ(seen, (std::vector<std::size_t>{1, 2, 3, 4, 5}));

    std::atomic<bool> flag{true};
    StatsAnalyzer b({"a"});
    RunOptions o;
    o.cancel = &flag;
    EXPECT_EQ(run_replicates(h, p, {}, b, [](std::size_t, TaskState) { return true; }, o), TaskState::cancelled);
}

TEST(RunTable, PoolsCounts) {
    TempDir dir;
    const auto h = two_columns(dir, 3000);
    SamplingPlan p;
    p.n = 3000;
    p.sequential = true;
    const auto tables = run_table(h, p, {"g"});
    ASSERT_EQ(tables.size(), 1u);
    EXPECT_EQ(tables[0].total, 3000u);
    EXPECT_EQ(tables[0].levels[0].level, "y");
    EXPECT_EQ(tables[0].levels[0].count, 2000u);
}

TEST(DefaultColumns, QuantitativeOrEverything) {
    TempDir dir;
    const auto h = two_columns(dir, 10);
    EXPECT_EQ(default_stats_columns(h, {}), (std::vector<std::string>{"a"}));
    const auto all_qual = open_dataset(dir / "d.csv", SourceType::no_codebook);
    EXPECT_EQ(default_stats_columns(all_qual, {}), (std::vector<std::string>{"a", "g"}));
}
