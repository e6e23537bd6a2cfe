#include "pondstat/error.hpp"
#include "pondstat/transform.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

using namespace pondstat;
using testsupport::make_frame;
using testsupport::qual;
using testsupport::quant;

TEST(Transform, ApplyReplacesColumn) {
    TransformProgram p;
    p.add_apply("v", "if(x > 0, 1, 0)");
    const Frame f = apply_program(make_frame({quant("v", {-2, 0, 3, std::nan("")})}), p);
    const auto& v = f.column("v").values;
    EXPECT_EQ(v[0], 0.0);
    EXPECT_EQ(v[1], 0.0);
    EXPECT_EQ(v[2], 1.0);
    EXPECT_TRUE(std::isnan(v[3]));
}

TEST(Transform, BinIntoNamedLevels) {
    TransformProgram p;
    p.add_bin("t", {700, 1200, 1900}, {"midnight", "morning", "afternoon", "evening"});
    const Frame f = apply_program(make_frame({quant("t", {1327, 5, 700, 2300, std::nan("")})}), p);
    const auto& c = f.column("t");
    EXPECT_FALSE(c.quantitative());
    EXPECT_EQ(c.labels[0], "afternoon");
    EXPECT_EQ(c.labels[1], "midnight");
    EXPECT_EQ(c.labels[2], "morning");
    EXPECT_EQ(c.labels[3], "evening");
    EXPECT_FALSE(c.labels[4]);
}

TEST(Transform, DummiesWithBaseGroup) {
    const Frame f = expand_dummies(make_frame({qual("d", {"midnight", "morning", std::nullopt, "evening"})}), "d",
                                   {"morning", "afternoon", "evening"});
    ASSERT_EQ(f.names(), (std::vector<std::string>{"d_morning", "d_afternoon", "d_evening"}));
    EXPECT_EQ(f.column("d_morning").values[0] + f.column("d_afternoon").values[0] + f.column("d_evening").values[0], 0.0);
    EXPECT_EQ(f.column("d_morning").values[1], 1.0);
    EXPECT_TRUE(std::isnan(f.column("d_evening").values[2]));
    EXPECT_EQ(f.column("d_evening").values[3], 1.0);
}

TEST(Transform, DummiesMatchNumericLevels) {
    const Frame f = expand_dummies(make_frame({quant("dow", {1, 7, 3.0})}), "dow", {"1", "2", "3", "4", "5", "6"});
    EXPECT_EQ(f.column("dow_1").values, (std::vector<double>{1, 0, 0}));
    EXPECT_EQ(f.column("dow_3").values, (std::vector<double>{0, 0, 1}));
    double sunday = 0;
    for (int l = 1; l <= 6; ++l) sunday += f.column("dow_" + std::to_string(l)).values[1];
    EXPECT_EQ(sunday, 0.0);
}

TEST(Transform, ProgramTextRoundTrip) {
    const auto p = TransformProgram::parse("# comment\napp a sign(x)*log1p(abs(x))\n\nbin t 700,1200 lo,mid,hi\nady t mid,hi\n");
    ASSERT_EQ(p.steps().size(), 3u);
    const auto again = TransformProgram::parse(p.to_text());
    EXPECT_EQ(again.to_text(), p.to_text());
    EXPECT_THROW(TransformProgram::parse_step("bin t 2,1 a,b,c"), UsageError);
    EXPECT_THROW(TransformProgram::parse_step("bin t 1,2 a,b"), UsageError);
    EXPECT_THROW(TransformProgram::parse_step("ady t"), UsageError);
    EXPECT_THROW(TransformProgram::parse_step("ady t a,a"), UsageError);
    EXPECT_THROW(TransformProgram::parse_step("zap t x"), UsageError);
    EXPECT_THROW(TransformProgram::parse_step("app t log("), UsageError);
}

TEST(Transform, OutputColumnsValidateReferences) {
    Codebook cb;
    cb.qlist = {"a"};
    cb.drop = {"c"};
    const auto schema = Schema::from_codebook({"a", "b", "c"}, cb);
    TransformProgram p;
    p.add_dummies("b", {"x", "y"});
    const auto cols = p.output_columns(schema);
    std::vector<std::string> names;
    for (const auto& [n, r] : cols) names.push_back(n);
    EXPECT_EQ(names, (std::vector<std::string>{"a", "b_x", "b_y", "_INTERCEPT_"}));

    TransformProgram bad;
    bad.add_apply("c", "x");
    try {
        (void)bad.output_columns(schema);
        FAIL();
    } catch (const UsageError& e) {
        EXPECT_NE(std::string(e.what()).find("'c'"), std::string::npos);
    }
    TransformProgram unknown;
    unknown.add_apply("zz", "x");
    EXPECT_THROW((void)unknown.output_columns(schema), UsageError);
    TransformProgram twice;
    twice.add_dummies("b", {"x"});
    twice.add_apply("b", "x");
    EXPECT_THROW((void)twice.output_columns(schema), UsageError);
}

TEST(Transform, RowCountPreserved) {
    TransformProgram p;
    p.add_apply("a", "log(x)");
    p.add_bin("a", {0}, {"neg", "pos"});
    p.add_dummies("a", {"pos"});
    const Frame f = apply_program(make_frame({quant("a", {-1, 0.5, 10, 3})}), p);
    EXPECT_EQ(f.rows, 4u);
    EXPECT_EQ(f.column("a_pos").values.size(), 4u);
}
