#include "pondstat/error.hpp"
#include "pondstat/expr.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace pondstat;

TEST(Expr, ParsesAndEvaluates) {
    EXPECT_EQ(expr::evaluate(expr::parse("x"), 4.0), 4.0);
    EXPECT_EQ(expr::evaluate(expr::parse("1 + 2 * 3"), 0), 7.0);
    EXPECT_EQ(expr::evaluate(expr::parse("2 ^ 3 ^ 2"), 0), 512.0);
    EXPECT_EQ(expr::evaluate(expr::parse("-2 ^ 2"), 0), -4.0);
    EXPECT_EQ(expr::evaluate(expr::parse("(x - 1) / 2"), 5), 2.0);
    EXPECT_EQ(expr::evaluate(expr::parse("x >= 3"), 3), 1.0);
    EXPECT_EQ(expr::evaluate(expr::parse("x != 3"), 3), 0.0);
    EXPECT_EQ(expr::evaluate(expr::parse("if(x > 0, 1, 0)"), -2), 0.0);
    EXPECT_EQ(expr::evaluate(expr::parse("min(max(floor(x/100),5),22)"), 2359), 22.0);
}

TEST(Expr, SignLog1pFixedPoints) {
    const auto e = expr::parse("sign(x)*log1p(abs(x))");
    EXPECT_EQ(expr::evaluate(e, 0.0), 0.0);
    EXPECT_NEAR(expr::evaluate(e, -(std::exp(1.0) - 1.0)), -1.0, 1e-15);
}

TEST(Expr, DomainErrorsGiveMissing) {
    for (const char* s : {"log(x)", "sqrt(x - 1)", "1 / (x - 0)", "log1p(x - 1)", "exp(1000 * (x + 1))"}) {
        EXPECT_TRUE(std::isnan(expr::evaluate(expr::parse(s), 0.0))) << s;
    }
    EXPECT_TRUE(std::isnan(expr::evaluate(expr::parse("x + 1"), std::nan(""))));
    // The untaken branch of if() may be undefined.
    EXPECT_EQ(expr::evaluate(expr::parse("if(x > 0, log(x), 0)"), -1), 0.0);
}

TEST(Expr, SyntaxErrorsCarryPosition) {
    try {
        expr::parse("1 + * 2");
        FAIL();
    } catch (const expr::SyntaxError& e) {
        EXPECT_EQ(e.position(), 4u);
    }
    EXPECT_THROW(expr::parse(""), UsageError);
    EXPECT_THROW(expr::parse("foo(x)"), UsageError);
    EXPECT_THROW(expr::parse("y + 1"), UsageError);
    EXPECT_THROW(expr::parse("min(x)"), UsageError);
    EXPECT_THROW(expr::parse("(x"), UsageError);
    EXPECT_THROW(expr::parse("x x"), UsageError);
    EXPECT_THROW(expr::parse(std::string(1000, '(') + "x" + std::string(1000, ')')), UsageError);
}

TEST(Expr, PrintParseRoundTrip) {
    for (const char* s : {"sign(x)*log1p(abs(x))", "-3", "if(x<=2, x^2, -x)", "2^-1", "min(x, 1e-3)", "--x",
                          "x == 1", "1 - (2 - 3)"}) {
        const auto e = expr::parse(s);
        EXPECT_EQ(expr::parse(expr::to_string(e)), e) << s << " -> " << expr::to_string(e);
    }
}
