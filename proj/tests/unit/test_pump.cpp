#include "pondstat/error.hpp"
#include "pondstat/pump.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <map>
#include <set>

using namespace pondstat;
using testsupport::TempDir;

namespace {

DatasetHandle numbered(const TempDir& dir, std::size_t rows) {
    testsupport::write_csv(dir / "n.csv", "id,v", rows, [](std::size_t i) { return std::to_string(i) + ",1"; });
    return testsupport::open_with_qlist(dir / "n.csv", {"id", "v"});
}

} // namespace

TEST(Plan, Validation) {
    SamplingPlan p;
    EXPECT_NO_THROW(p.validate());
    p.n = 0;
    EXPECT_THROW(p.validate(), UsageError);
    p = {};
    p.k_max = 0;
    EXPECT_THROW(p.validate(), UsageError);
    p = {};
    p.se_target = -1.0;
    EXPECT_THROW(p.validate(), UsageError);
}

TEST(Pump, SequentialReadsConsecutiveRowsAndWraps) {
    TempDir dir;
    const auto h = numbered(dir, 50);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Frame f = draw_sequential(h, 30, seed);
        ASSERT_EQ(f.rows, 30u);
        const auto& id = f.column("id").values;
        for (std::size_t i = 1; i < id.size(); ++i) {
            EXPECT_EQ(id[i], std::fmod(id[i - 1] + 1.0, 50.0));
        }
    }
}

TEST(Pump, SequentialFullCoverageVisitsEveryRowOnce) {
    TempDir dir;
    const auto h = numbered(dir, 37);
    const Frame f = draw_sequential(h, 37, 11);
    std::set<double> seen(f.column("id").values.begin(), f.column("id").values.end());
    EXPECT_EQ(seen.size(), 37u);
    EXPECT_EQ(draw_sequential(h, 100, 11).rows, 37u);
}

TEST(Pump, DrawsAreReproducibleAndSeedDependent) {
    TempDir dir;
    const auto h = numbered(dir, 1000);
    SamplingPlan p;
    p.n = 64;
    p.master_seed = 5;
    EXPECT_EQ(draw_replicate(h, p, 3).column("id").values, draw_replicate(h, p, 3).column("id").values);
    EXPECT_NE(draw_replicate(h, p, 3).column("id").values, draw_replicate(h, p, 4).column("id").values);
    EXPECT_NE(draw_replicate(h, p, 3).column("id").values, draw_holdout(h, p, 3).column("id").values);
}

TEST(Pump, InterceptColumnAppended) {
    TempDir dir;
    const auto h = numbered(dir, 10);
    const Frame f = draw_random_access(h, 5, 1);
    EXPECT_EQ(f.columns.back().name, kIntercept);
    EXPECT_EQ(f.columns.back().values, std::vector<double>(5, 1.0));
}

// The row after the sampled byte is returned, so a row's chance is its
// predecessor's length (terminator included) over the data extent.
TEST(Pump, RandomAccessFollowsPredecessorLength) {
    TempDir dir;
    std::vector<std::string> rows = {"0,aaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa", "1,b", "2,c", "3,dddddddddddddddddddd"};
    std::string text = "id,s\n";
    for (const auto& r : rows) text += r + "\n";
    testsupport::write_file(dir / "w.csv", text);
    const auto h = testsupport::open_with_qlist(dir / "w.csv", {"id"});
    const double extent = static_cast<double>(h.data_end - h.data_start);

    const std::size_t draws = 200000;
    std::map<int, double> counts;
    const Frame f = draw_random_access(h, draws, 77);
    for (double v : f.column("id").values) counts[static_cast<int>(v)] += 1;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::size_t pred = (i + rows.size() - 1) % rows.size();
        const double p = static_cast<double>(rows[pred].size() + 1) / extent;
        const double sd = std::sqrt(p * (1 - p) / draws);
        EXPECT_NEAR(counts[static_cast<int>(i)] / draws, p, 5 * sd) << "row " << i;
    }
}

TEST(Pump, IndexedDrawIsUniform) {
    TempDir dir;
    std::string text = "id,s\n0," + std::string(500, 'x') + "\n1,y\n2,z\n3,w\n";
    testsupport::write_file(dir / "u.csv", text);
    const auto h = testsupport::open_with_qlist(dir / "u.csv", {"id"});
    const auto index = LineIndex::build(h);
    ASSERT_EQ(index.size(), 4u);
    SamplingPlan p;
    p.n = 40000;
    p.use_index = true;
    std::map<int, double> counts;
    const Frame f = draw_replicate(h, p, 1, &index);
    for (double v : f.column("id").values) counts[static_cast<int>(v)] += 1;
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(counts[i] / 40000.0, 0.25, 0.015);
    EXPECT_THROW(draw_replicate(h, p, 1, nullptr), UsageError);
}

TEST(LineIndex, SaveLoadAndStaleDetection) {
    TempDir dir;
    const auto h = numbered(dir, 100);
    const auto built = LineIndex::build(h);
    const auto path = LineIndex::sidecar_path(h.path);
    EXPECT_EQ(path.filename().string(), "n.csv.lix");
    built.save(path);
    const auto loaded = LineIndex::load(path, h);
    ASSERT_EQ(loaded.size(), built.size());
    for (std::size_t i = 0; i < built.size(); ++i) EXPECT_EQ(loaded.offset(i), built.offset(i));
    EXPECT_EQ(testsupport::read_file(path).size(), 8u * 100u);

    testsupport::write_file(path, std::string(8 * 3, '\0'));
    EXPECT_THROW(LineIndex::load(path, h), DataError);
    EXPECT_EQ(LineIndex::open_or_build(h).size(), 100u);
}

TEST(ParseFrame, DiscardsMalformedRecords) {
    Codebook cb;
    cb.qlist = {"a"};
    const auto schema = Schema::from_codebook({"a", "b"}, cb);
    std::vector<std::string_view> lines = {"1,x", "2", "3,y"};
    const Frame f = parse_frame(lines, schema);
    EXPECT_EQ(f.rows, 2u);
    EXPECT_EQ(f.discarded, 1u);
    EXPECT_FALSE(f.warnings.empty());
    std::vector<std::string_view> bad = {"1", "2", "3,y"};
    EXPECT_THROW(parse_frame(bad, schema), DataError);
}

TEST(ParseFrame, MissingAndNonNumericCells) {
    Codebook cb;
    cb.qlist = {"a"};
    const auto schema = Schema::from_codebook({"a", "b"}, cb);
    std::vector<std::string_view> lines = {"NA,x", "abc,", "4.5,NaN"};
    const Frame f = parse_frame(lines, schema);
    EXPECT_TRUE(std::isnan(f.column("a").values[0]));
    EXPECT_TRUE(std::isnan(f.column("a").values[1]));
    EXPECT_EQ(f.column("a").values[2], 4.5);
    EXPECT_EQ(f.column("b").labels[0], "x");
    EXPECT_FALSE(f.column("b").labels[1]);
    EXPECT_FALSE(f.column("b").labels[2]);
}
