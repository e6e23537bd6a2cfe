#pragma once

#include "pondstat/expr.hpp"
#include "pondstat/frame.hpp"
#include "pondstat/source.hpp"

#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace pondstat {

/// Replace a column by expr(x) cell by cell.
struct ApplyStep {
    std::string column;
    expr::Expr expression;
    std::string text;
};

/// Replace a numeric column by level names: thresholds t1 < ... < tm split
/// the line into (-inf, t1), [t1, t2), ..., [tm, inf), named in order.
struct BinStep {
    std::string column;
    std::vector<double> thresholds;
    std::vector<std::string> names;
};

/// Replace a column by one 0/1 column `<column>_<level>` per listed level.
/// Values outside the list form the base group (all zeros).
struct DummyStep {
    std::string column;
    std::vector<std::string> levels;
};

using TransformStep = std::variant<ApplyStep, BinStep, DummyStep>;

/// The ordered cleaning pipeline applied to every frame before analysis.
class TransformProgram {
public:
    TransformProgram() = default;

    void add_apply(std::string column, std::string_view expression);
    void add_bin(std::string column, std::vector<double> thresholds, std::vector<std::string> names);
    void add_dummies(std::string column, std::vector<std::string> levels);
    void add(TransformStep step);

    /// Program text: one step per line, `app <col> <expr>`,
    /// `bin <col> <t1,..,tm> <name0,..,namem>` or `ady <col> <l1,..,lk>`.
    /// Blank lines and lines starting with '#' are ignored.
    static TransformProgram parse(std::string_view text);
    /// Parses a single step line (same syntax as program files).
    static TransformStep parse_step(std::string_view line);
    [[nodiscard]] std::string to_text() const;

    [[nodiscard]] const std::vector<TransformStep>& steps() const noexcept { return steps_; }
    [[nodiscard]] bool empty() const noexcept { return steps_.empty(); }

    /// Columns (name, role) a frame drawn under `schema` has after the
    /// program runs. Throws UsageError naming the first bad reference.
    [[nodiscard]] std::vector<std::pair<std::string, Role>> output_columns(const Schema& schema) const;

private:
    std::vector<TransformStep> steps_;
};

std::string to_text(const TransformStep& step);

/// Applies every step in order. Row count never changes.
Frame apply_program(Frame frame, const TransformProgram& program);

Frame expand_dummies(Frame frame, std::string_view column, const std::vector<std::string>& levels);

} // namespace pondstat
