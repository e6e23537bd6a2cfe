#include "pondstat/transform.hpp"

#include "pondstat/csv.hpp"
#include "pondstat/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace pondstat {

namespace {

std::vector<std::string> split_list(std::string_view text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        std::string_view item = text.substr(pos, comma - pos);
        while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
        if (item.empty()) throw UsageError("empty item in list '" + std::string(text) + "'");
        out.emplace_back(item);
        pos = comma + 1;
    }
    return out;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i > 0) out += ',';
        out += items[i];
    }
    return out;
}

// Splits off the next blank-delimited word.
std::string_view next_word(std::string_view& rest) {
    while (!rest.empty() && (rest.front() == ' ' || rest.front() == '\t')) rest.remove_prefix(1);
    const std::size_t end = std::min(rest.find_first_of(" \t"), rest.size());
    const std::string_view word = rest.substr(0, end);
    rest.remove_prefix(end);
    while (!rest.empty() && (rest.front() == ' ' || rest.front() == '\t')) rest.remove_prefix(1);
    return word;
}

void check_bin(const BinStep& step) {
    if (step.thresholds.empty()) throw UsageError("bin needs at least one threshold");
    if (step.names.size() != step.thresholds.size() + 1) {
        throw UsageError("bin with " + std::to_string(step.thresholds.size()) + " thresholds needs " +
                         std::to_string(step.thresholds.size() + 1) + " level names");
    }
    for (std::size_t i = 1; i < step.thresholds.size(); ++i) {
        if (!(step.thresholds[i] > step.thresholds[i - 1])) {
            throw UsageError("bin thresholds must be strictly ascending");
        }
    }
}

void check_levels(const std::vector<std::string>& levels) {
    if (levels.empty()) throw UsageError("dummy expansion needs at least one level");
    std::set<std::string> seen;
    for (const auto& l : levels) {
        if (!seen.insert(l).second) throw UsageError("level '" + l + "' listed twice");
    }
}

const std::string& step_column(const TransformStep& step) {
    return std::visit([](const auto& s) -> const std::string& { return s.column; }, step);
}

Column& mutable_column(Frame& frame, const std::string& name) {
    Column* c = frame.find(name);
    if (c == nullptr) throw UsageError("transform references unknown or dropped column '" + name + "'");
    if (name == kIntercept) throw UsageError("_INTERCEPT_ cannot be transformed");
    return *c;
}

void to_quantitative(Column& c) {
    if (c.quantitative()) return;
    c.values = numeric_values(c);
    c.labels.clear();
    c.role = Role::quantitative;
}

} // namespace

// ---------------------------------------------------------------------------
// Program construction

void TransformProgram::add_apply(std::string column, std::string_view expression) {
    ApplyStep step{std::move(column), expr::parse(expression), std::string(expression)};
    steps_.emplace_back(std::move(step));
}

void TransformProgram::add_bin(std::string column, std::vector<double> thresholds, std::vector<std::string> names) {
    BinStep step{std::move(column), std::move(thresholds), std::move(names)};
    check_bin(step);
    steps_.emplace_back(std::move(step));
}

void TransformProgram::add_dummies(std::string column, std::vector<std::string> levels) {
    check_levels(levels);
    steps_.emplace_back(DummyStep{std::move(column), std::move(levels)});
}

void TransformProgram::add(TransformStep step) {
    if (auto* b = std::get_if<BinStep>(&step)) check_bin(*b);
    if (auto* d = std::get_if<DummyStep>(&step)) check_levels(d->levels);
    steps_.push_back(std::move(step));
}

TransformStep TransformProgram::parse_step(std::string_view line) {
    std::string_view rest = line;
    const std::string_view verb = next_word(rest);
    const std::string column(next_word(rest));
    if (column.empty()) throw UsageError("'" + std::string(verb) + "' needs a column name");

    if (verb == "app") {
        if (rest.empty()) throw UsageError("app needs an expression");
        return ApplyStep{column, expr::parse(rest), std::string(rest)};
    }
    if (verb == "bin") {
        const std::string_view cuts = next_word(rest);
        const std::string_view names = next_word(rest);
        if (cuts.empty() || names.empty() || !rest.empty()) {
            throw UsageError("usage: bin <col> <t1,..,tm> <name0,..,namem>");
        }
        BinStep step{column, {}, split_list(names)};
        for (const auto& t : split_list(cuts)) {
            const auto v = csv::parse_number(t);
            if (!v) throw UsageError("bin threshold '" + t + "' is not a number");
            step.thresholds.push_back(*v);
        }
        check_bin(step);
        return step;
    }
    if (verb == "ady") {
        const std::string_view levels = next_word(rest);
        if (levels.empty() || !rest.empty()) throw UsageError("usage: ady <col> <l1,..,lk>");
        DummyStep step{column, split_list(levels)};
        check_levels(step.levels);
        return step;
    }
    throw UsageError("unknown transform '" + std::string(verb) + "' (expected app, bin or ady)");
}

TransformProgram TransformProgram::parse(std::string_view text) {
    TransformProgram program;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        const std::size_t nl = std::min(text.find('\n', pos), text.size());
        std::string_view line = csv::strip_cr(text.substr(pos, nl - pos));
        pos = nl + 1;
        ++line_no;
        while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
        if (line.empty() || line.front() == '#') continue;
        try {
            program.steps_.push_back(parse_step(line));
        } catch (const UsageError& e) {
            throw UsageError("program line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return program;
}

std::string to_text(const TransformStep& step) {
    if (const auto* a = std::get_if<ApplyStep>(&step)) return "app " + a->column + " " + a->text;
    if (const auto* b = std::get_if<BinStep>(&step)) {
        std::vector<std::string> cuts;
        for (double t : b->thresholds) cuts.push_back(csv::format_number(t));
        return "bin " + b->column + " " + join(cuts) + " " + join(b->names);
    }
    const auto& d = std::get<DummyStep>(step);
    return "ady " + d.column + " " + join(d.levels);
}

std::string TransformProgram::to_text() const {
    std::string out;
    for (const auto& step : steps_) {
        out += pondstat::to_text(step);
        out += '\n';
    }
    return out;
}

std::vector<std::pair<std::string, Role>> TransformProgram::output_columns(const Schema& schema) const {
    std::vector<std::pair<std::string, Role>> cols;
    for (const auto& c : schema.columns()) {
        if (c.role != Role::dropped) cols.emplace_back(c.name, c.role);
    }
    for (const auto& step : steps_) {
        const std::string& name = step_column(step);
        auto it = std::find_if(cols.begin(), cols.end(), [&](const auto& c) { return c.first == name; });
        if (it == cols.end()) {
            const ColumnSpec* spec = schema.find(name);
            if (spec != nullptr && spec->role == Role::dropped) {
                throw UsageError("transform references dropped column '" + name + "'");
            }
            throw UsageError("transform references unknown column '" + name + "'");
        }
        if (name == kIntercept) throw UsageError("_INTERCEPT_ cannot be transformed");
        if (std::holds_alternative<ApplyStep>(step)) {
            it->second = Role::quantitative;
        } else if (std::holds_alternative<BinStep>(step)) {
            it->second = Role::qualitative;
        } else {
            const auto& d = std::get<DummyStep>(step);
            std::vector<std::pair<std::string, Role>> dummies;
            for (const auto& level : d.levels) dummies.emplace_back(name + "_" + level, Role::quantitative);
            const auto at = cols.erase(it);
            cols.insert(at, dummies.begin(), dummies.end());
        }
    }
    return cols;
}

// ---------------------------------------------------------------------------
// Application

Frame expand_dummies(Frame frame, std::string_view column, const std::vector<std::string>& levels) {
    check_levels(levels);
    const std::string name(column);
    const std::size_t at = frame.index_of(name);
    if (name == kIntercept) throw UsageError("_INTERCEPT_ cannot be expanded");
    Column source = std::move(frame.columns[at]);

    // Quantitative sources match numerically (level "1" matches 1.0).
    std::vector<double> numeric_levels;
    if (source.quantitative()) {
        for (const auto& l : levels) {
            const auto v = csv::parse_number(l);
            if (!v) throw UsageError("level '" + l + "' of numeric column '" + name + "' is not a number");
            numeric_levels.push_back(*v);
        }
    }

    std::vector<Column> dummies(levels.size());
    for (std::size_t j = 0; j < levels.size(); ++j) {
        dummies[j].name = name + "_" + levels[j];
        dummies[j].role = Role::quantitative;
        dummies[j].values.reserve(frame.rows);
    }
    for (std::size_t r = 0; r < frame.rows; ++r) {
        if (source.missing(r)) {
            for (auto& d : dummies) d.values.push_back(std::nan(""));
            continue;
        }
        for (std::size_t j = 0; j < levels.size(); ++j) {
            const bool hit = source.quantitative() ? source.values[r] == numeric_levels[j]
                                                   : *source.labels[r] == levels[j];
            dummies[j].values.push_back(hit ? 1.0 : 0.0);
        }
    }
    frame.columns.erase(frame.columns.begin() + static_cast<std::ptrdiff_t>(at));
    frame.columns.insert(frame.columns.begin() + static_cast<std::ptrdiff_t>(at),
                         std::make_move_iterator(dummies.begin()), std::make_move_iterator(dummies.end()));
    return frame;
}

Frame apply_program(Frame frame, const TransformProgram& program) {
    for (const auto& step : program.steps()) {
        if (const auto* a = std::get_if<ApplyStep>(&step)) {
            Column& c = mutable_column(frame, a->column);
            to_quantitative(c);
            for (double& v : c.values) v = expr::evaluate(a->expression, v);
        } else if (const auto* b = std::get_if<BinStep>(&step)) {
            Column& c = mutable_column(frame, b->column);
            to_quantitative(c);
            std::vector<std::optional<std::string>> labels;
            labels.reserve(c.values.size());
            for (double v : c.values) {
                if (std::isnan(v)) {
                    labels.emplace_back(std::nullopt);
                    continue;
                }
                const auto bin = std::upper_bound(b->thresholds.begin(), b->thresholds.end(), v) -
                                 b->thresholds.begin();
                labels.emplace_back(b->names[static_cast<std::size_t>(bin)]);
            }
            c.values.clear();
            c.labels = std::move(labels);
            c.role = Role::qualitative;
        } else {
            const auto& d = std::get<DummyStep>(step);
            mutable_column(frame, d.column);
            frame = expand_dummies(std::move(frame), d.column, d.levels);
        }
    }
    return frame;
}

} // namespace pondstat
