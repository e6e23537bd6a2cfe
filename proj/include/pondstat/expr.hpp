#pragma once

#include "pondstat/error.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

/// Single-variable expression language for column transformations.
///
///   expr  := cmp | "if" "(" expr "," expr "," expr ")"
///   cmp   := add (("<"|"<="|">"|">="|"=="|"!=") add)?
///   add   := mul (("+"|"-") mul)*
///   mul   := unary (("*"|"/") unary)*
///   unary := "-" unary | pow
///   pow   := atom ("^" unary)?
///   atom  := number | "x" | func "(" args ")" | "(" expr ")"
///
/// `if(...)` is also accepted wherever an atom is. Comparisons yield 1 or 0.
/// Missing values (NaN) propagate, and every domain error (log of a
/// non-positive number, division by zero, overflow) yields missing.
namespace pondstat::expr {

enum class Op {
    number,
    variable,
    negate,
    add,
    sub,
    mul,
    div,
    pow,
    lt,
    le,
    gt,
    ge,
    eq,
    ne,
    cond,
    call,
};

enum class Func { log, log1p, exp, abs, sign, floor, ceil, sqrt, min, max };

struct Expr {
    Op op = Op::number;
    double value = 0.0;   // Op::number
    Func func = Func::log; // Op::call
    std::vector<Expr> args;

    bool operator==(const Expr&) const = default;
};

class SyntaxError : public UsageError {
public:
    SyntaxError(const std::string& message, std::size_t position);
    [[nodiscard]] std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

Expr parse(std::string_view text);

/// Evaluates at `x`; NaN in, NaN out. Never throws, never returns inf.
double evaluate(const Expr& e, double x) noexcept;

/// Fully parenthesized text that parses back to the same tree.
std::string to_string(const Expr& e);

std::string_view function_name(Func f) noexcept;

} // namespace pondstat::expr
