#include "pondstat/expr.hpp"

#include "pondstat/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <utility>

namespace pondstat::expr {

namespace {

constexpr std::size_t kMaxDepth = 256;
constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

struct FuncInfo {
    std::string_view name;
    Func func;
    std::size_t arity;
};

constexpr std::array<FuncInfo, 10> kFunctions{{
    {"log", Func::log, 1},
    {"log1p", Func::log1p, 1},
    {"exp", Func::exp, 1},
    {"abs", Func::abs, 1},
    {"sign", Func::sign, 1},
    {"floor", Func::floor, 1},
    {"ceil", Func::ceil, 1},
    {"sqrt", Func::sqrt, 1},
    {"min", Func::min, 2},
    {"max", Func::max, 2},
}};

bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

Expr node(Op op, std::vector<Expr> args) {
    Expr e;
    e.op = op;
    e.args = std::move(args);
    return e;
}

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Expr parse_all() {
        skip_ws();
        if (pos_ == text_.size()) fail("empty expression");
        Expr e = parse_expr();
        skip_ws();
        if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& what) const { throw SyntaxError(what, pos_); }

    void skip_ws() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
    }

    bool accept(std::string_view tok) {
        skip_ws();
        if (text_.substr(pos_, tok.size()) == tok) {
            pos_ += tok.size();
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(std::string_view(&c, 1))) fail(std::string("expected '") + c + "'");
    }

    struct DepthGuard {
        explicit DepthGuard(Parser& p) : p_(p) {
            if (++p_.depth_ > kMaxDepth) p_.fail("expression nested too deeply");
        }
        ~DepthGuard() { --p_.depth_; }
        Parser& p_;
    };

    Expr parse_expr() {
        DepthGuard guard(*this);
        return parse_cmp();
    }

    Expr parse_cmp() {
        Expr lhs = parse_add();
        static constexpr std::array<std::pair<std::string_view, Op>, 6> kCmp{{
            {"<=", Op::le}, {">=", Op::ge}, {"==", Op::eq}, {"!=", Op::ne}, {"<", Op::lt}, {">", Op::gt},
        }};
        for (const auto& [tok, op] : kCmp) {
            if (accept(tok)) return node(op, {std::move(lhs), parse_add()});
        }
        return lhs;
    }

    Expr parse_add() {
        Expr lhs = parse_mul();
        while (true) {
            if (accept("+")) lhs = node(Op::add, {std::move(lhs), parse_mul()});
            else if (accept("-")) lhs = node(Op::sub, {std::move(lhs), parse_mul()});
            else return lhs;
        }
    }

    Expr parse_mul() {
        Expr lhs = parse_unary();
        while (true) {
            if (accept("*")) lhs = node(Op::mul, {std::move(lhs), parse_unary()});
            else if (accept("/")) lhs = node(Op::div, {std::move(lhs), parse_unary()});
            else return lhs;
        }
    }

    Expr parse_unary() {
        DepthGuard guard(*this);
        if (accept("-")) return node(Op::negate, {parse_unary()});
        return parse_pow();
    }

    Expr parse_pow() {
        Expr base = parse_atom();
        if (accept("^")) return node(Op::pow, {std::move(base), parse_unary()});
        return base;
    }

    Expr parse_atom() {
        skip_ws();
        if (pos_ == text_.size()) fail("unexpected end of expression");
        const char c = text_[pos_];
        if (is_digit(c) || c == '.') return parse_number();
        if (c == '(') {
            ++pos_;
            Expr inner = parse_expr();
            expect(')');
            return inner;
        }
        if (is_ident_start(c)) return parse_identifier();
        fail("unexpected '" + std::string(1, c) + "'");
    }

    Expr parse_number() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
        }
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t p = pos_ + 1;
            if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
            if (p < text_.size() && is_digit(text_[p])) {
                pos_ = p;
                while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
            }
        }
        const std::string_view lexeme = text_.substr(start, pos_ - start);
        double v = 0.0;
        const auto [end, ec] = std::from_chars(lexeme.data(), lexeme.data() + lexeme.size(), v);
        if (ec != std::errc{} || end != lexeme.data() + lexeme.size() || !std::isfinite(v)) {
            pos_ = start;
            fail("invalid number '" + std::string(lexeme) + "'");
        }
        Expr e;
        e.op = Op::number;
        e.value = v;
        return e;
    }

    Expr parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
        const std::string_view name = text_.substr(start, pos_ - start);
        if (name == "x") return node(Op::variable, {});

        skip_ws();
        const bool call = pos_ < text_.size() && text_[pos_] == '(';
        if (!call) {
            pos_ = start;
            fail("unknown variable '" + std::string(name) + "' (only x is defined)");
        }
        if (name == "if") {
            ++pos_;
            Expr c = parse_expr();
            expect(',');
            Expr a = parse_expr();
            expect(',');
            Expr b = parse_expr();
            expect(')');
            return node(Op::cond, {std::move(c), std::move(a), std::move(b)});
        }
        const FuncInfo* info = nullptr;
        for (const auto& f : kFunctions) {
            if (f.name == name) info = &f;
        }
        if (info == nullptr) {
            pos_ = start;
            fail("unknown function '" + std::string(name) + "'");
        }
        ++pos_;
        std::vector<Expr> args;
        args.push_back(parse_expr());
        while (accept(",")) args.push_back(parse_expr());
        expect(')');
        if (args.size() != info->arity) {
            pos_ = start;
            fail(std::string(name) + " takes " + std::to_string(info->arity) + " argument(s)");
        }
        Expr e = node(Op::call, std::move(args));
        e.func = info->func;
        return e;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t depth_ = 0;
};

double finite_or_missing(double v) noexcept { return std::isfinite(v) ? v : kMissing; }

double call(Func f, double a, double b) noexcept {
    switch (f) {
    case Func::log: return a > 0.0 ? std::log(a) : kMissing;
    case Func::log1p: return a > -1.0 ? std::log1p(a) : kMissing;
    case Func::exp: return std::exp(a);
    case Func::abs: return std::fabs(a);
    case Func::sign: return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0);
    case Func::floor: return std::floor(a);
    case Func::ceil: return std::ceil(a);
    case Func::sqrt: return a >= 0.0 ? std::sqrt(a) : kMissing;
    case Func::min: return a < b ? a : b;
    case Func::max: return a > b ? a : b;
    }
    return kMissing;
}

const char* op_symbol(Op op) noexcept {
    switch (op) {
    case Op::add: return "+";
    case Op::sub: return "-";
    case Op::mul: return "*";
    case Op::div: return "/";
    case Op::pow: return "^";
    case Op::lt: return "<";
    case Op::le: return "<=";
    case Op::gt: return ">";
    case Op::ge: return ">=";
    case Op::eq: return "==";
    case Op::ne: return "!=";
    default: return "?";
    }
}

} // namespace

SyntaxError::SyntaxError(const std::string& message, std::size_t position)
    : UsageError("syntax error at position " + std::to_string(position) + ": " + message), position_(position) {}

Expr parse(std::string_view text) { return Parser(text).parse_all(); }

double evaluate(const Expr& e, double x) noexcept {
    switch (e.op) {
    case Op::number: return e.value;
    case Op::variable: return finite_or_missing(x);
    case Op::negate: return -evaluate(e.args[0], x);
    case Op::cond: {
        const double c = evaluate(e.args[0], x);
        if (std::isnan(c)) return kMissing;
        return evaluate(e.args[c != 0.0 ? 1 : 2], x);
    }
    case Op::call: {
        const double a = evaluate(e.args[0], x);
        const double b = e.args.size() > 1 ? evaluate(e.args[1], x) : 0.0;
        if (std::isnan(a) || std::isnan(b)) return kMissing;
        return finite_or_missing(call(e.func, a, b));
    }
    default: break;
    }

    const double a = evaluate(e.args[0], x);
    const double b = evaluate(e.args[1], x);
    if (std::isnan(a) || std::isnan(b)) return kMissing;
    switch (e.op) {
    case Op::add: return finite_or_missing(a + b);
    case Op::sub: return finite_or_missing(a - b);
    case Op::mul: return finite_or_missing(a * b);
    case Op::div: return b == 0.0 ? kMissing : finite_or_missing(a / b);
    case Op::pow: return finite_or_missing(std::pow(a, b));
    case Op::lt: return a < b ? 1.0 : 0.0;
    case Op::le: return a <= b ? 1.0 : 0.0;
    case Op::gt: return a > b ? 1.0 : 0.0;
    case Op::ge: return a >= b ? 1.0 : 0.0;
    case Op::eq: return a == b ? 1.0 : 0.0;
    case Op::ne: return a != b ? 1.0 : 0.0;
    default: return kMissing;
    }
}

std::string_view function_name(Func f) noexcept {
    for (const auto& info : kFunctions) {
        if (info.func == f) return info.name;
    }
    return "?";
}

std::string to_string(const Expr& e) {
    switch (e.op) {
    case Op::number: return csv::format_number(e.value);
    case Op::variable: return "x";
    case Op::negate: return "(-" + to_string(e.args[0]) + ")";
    case Op::cond:
        return "if(" + to_string(e.args[0]) + ", " + to_string(e.args[1]) + ", " + to_string(e.args[2]) + ")";
    case Op::call: {
        std::string out(function_name(e.func));
        out += '(';
        for (std::size_t i = 0; i < e.args.size(); ++i) {
            if (i > 0) out += ", ";
            out += to_string(e.args[i]);
        }
        out += ')';
        return out;
    }
    default:
        return "(" + to_string(e.args[0]) + " " + op_symbol(e.op) + " " + to_string(e.args[1]) + ")";
    }
}

} // namespace pondstat::expr
