#include "pondstat/error.hpp"
#include "pondstat/source.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

using namespace pondstat;
using testsupport::TempDir;
using testsupport::write_file;

TEST(Codebook, ParsesAndValidates) {
    const auto cb = Codebook::parse_json(R"({"qlist":["a","_INTERCEPT_"],"drop":["c"],"scale_level":{"b":["x","y"]}})");
    EXPECT_EQ(cb.qlist, (std::vector<std::string>{"a", "_INTERCEPT_"}));
    EXPECT_EQ(cb.drop, (std::vector<std::string>{"c"}));
    EXPECT_EQ(cb.scale_level.at("b"), (std::vector<std::string>{"x", "y"}));
    EXPECT_NO_THROW(cb.validate({"a", "b", "c"}));
    EXPECT_THROW(cb.validate({"a", "b"}), UsageError);
    EXPECT_THROW(Codebook::parse_json(R"({"qlist":["a"],"drop":["a"]})").validate({"a"}), UsageError);
    EXPECT_THROW(Codebook::parse_json(R"({"drop":["_INTERCEPT_"]})").validate({"a"}), UsageError);
    EXPECT_THROW(Codebook::parse_json("not json"), UsageError);
}

TEST(Schema, RolesFollowCodebookAndInterceptIsLast) {
    Codebook cb;
    cb.qlist = {"b"};
    cb.drop = {"c"};
    const auto s = Schema::from_codebook({"a", "b", "c"}, cb);
    ASSERT_EQ(s.columns().size(), 4u);
    EXPECT_EQ(s.columns()[0].role, Role::qualitative);
    EXPECT_EQ(s.columns()[1].role, Role::quantitative);
    EXPECT_EQ(s.columns()[2].role, Role::dropped);
    EXPECT_EQ(s.columns()[3].name, kIntercept);
    EXPECT_EQ(s.columns()[3].role, Role::quantitative);
}

TEST(OpenDataset, HeaderErrors) {
    TempDir dir;
    write_file(dir / "dup.csv", "a,a\n1,2\n");
    EXPECT_THROW(open_dataset(dir / "dup.csv", SourceType::no_codebook), DataError);
    write_file(dir / "empty.csv", "");
    EXPECT_THROW(open_dataset(dir / "empty.csv", SourceType::no_codebook), DataError);
    write_file(dir / "res.csv", "_INTERCEPT_,b\n1,2\n");
    EXPECT_THROW(open_dataset(dir / "res.csv", SourceType::no_codebook), DataError);
    EXPECT_THROW(open_dataset(dir / "missing.csv", SourceType::no_codebook), DataError);
    write_file(dir / "ok.csv", "a,b\n1,2\n");
    EXPECT_THROW(open_dataset(dir / "ok.csv", SourceType::with_codebook), UsageError);
}

TEST(OpenDataset, StripsBomAndCr) {
    TempDir dir;
    write_file(dir / "bom.csv", "\xEF\xBB\xBFx,y\r\n1,2\r\n3,4\r\n");
    OpenOptions o;
    o.exact_count = true;
    const auto h = open_dataset(dir / "bom.csv", SourceType::no_codebook, std::nullopt, o);
    EXPECT_EQ(h.header, (std::vector<std::string>{"x", "y"}));
    EXPECT_EQ(h.n_estimate, 2u);
}

TEST(OpenDataset, ShuffledFlagFromName) {
    TempDir dir;
    write_file(dir / "d.csv.shuffle", "a\n1\n");
    write_file(dir / "d.csv", "a\n1\n");
    EXPECT_TRUE(open_dataset(dir / "d.csv.shuffle", SourceType::no_codebook).shuffled);
    EXPECT_FALSE(open_dataset(dir / "d.csv", SourceType::no_codebook).shuffled);
}

TEST(RowCount, ConstantWidthLinesAreExact) {
    TempDir dir;
    testsupport::write_csv(dir / "c.csv", "v", 1000, [](std::size_t i) {
        char b[16];
        std::snprintf(b, sizeof b, "%06zu", i);
        return std::string(b);
    });
    const auto h = open_dataset(dir / "c.csv", SourceType::no_codebook);
    EXPECT_EQ(h.n_estimate, 1000u);
    EXPECT_EQ(count_rows_exact(h), 1000u);
}

TEST(RowCount, ProbesReadBoundedBytes) {
    TempDir dir;
    std::mt19937_64 rng(3);
    std::size_t max_len = 0;
    testsupport::write_csv(dir / "v.csv", "a,b", 20000, [&](std::size_t i) {
        std::string s = std::to_string(i) + "," + std::string(30 + rng() % 20, 'z');
        max_len = std::max(max_len, s.size());
        return s;
    });
    OpenOptions o;
    o.exact_count = true;
    const auto h = open_dataset(dir / "v.csv", SourceType::no_codebook, std::nullopt, o);
    ReadCounter counter;
    const std::size_t probes = 200;
    (void)estimate_row_count(h, probes, 9, &counter);
    EXPECT_LE(counter.bytes, probes * (max_len + 1));
    EXPECT_GT(counter.bytes, 0u);

    double abs_err = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const double est = static_cast<double>(estimate_row_count(h, 1000, seed));
        abs_err += std::abs(est - 20000.0) / 20000.0;
    }
    EXPECT_LT(abs_err / 100, 0.05);
}

TEST(Lines, NextLineStartWraps) {
    const std::string bytes = "h\nab\ncd\n";
    const std::uint64_t ds = 2, de = bytes.size();
    EXPECT_EQ(lines::next_line_start(bytes, 2, ds, de), 5u);
    EXPECT_EQ(lines::next_line_start(bytes, 4, ds, de), 5u);
    EXPECT_EQ(lines::next_line_start(bytes, 5, ds, de), ds);
    EXPECT_EQ(lines::next_line_start(bytes, 7, ds, de), ds);
    EXPECT_EQ(lines::line_at(bytes, 5, de).text, "cd");
}

TEST(UpdateSchema, KeepsDeclaredLevels) {
    TempDir dir;
    write_file(dir / "d.csv", "a,b,c\n1,x,3\n");
    Codebook cb;
    cb.scale_level["b"] = {"x", "y"};
    auto h = open_dataset(dir / "d.csv", SourceType::with_codebook, cb);
    h = update_schema(h, {"a"}, {"c"});
    EXPECT_EQ(h.schema.find("a")->role, Role::quantitative);
    EXPECT_EQ(h.schema.find("c")->role, Role::dropped);
    EXPECT_EQ(h.schema.find("b")->levels, (std::vector<std::string>{"x", "y"}));
}
