#include "pondstat/plotdata.hpp"

#include "pondstat/csv.hpp"
#include "pondstat/error.hpp"
#include "pondstat/text_table.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace pondstat {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> valid_values(const Frame& frame, std::string_view column) {
    std::vector<double> out;
    for (double v : numeric_values(frame.column(column))) {
        if (!std::isnan(v)) out.push_back(v);
    }
    return out;
}

// Numeric order when every level parses as a number, else lexicographic;
// `nan` always last.
std::vector<std::string> ordered_levels(const std::vector<std::string>& keys) {
    std::vector<std::string> levels;
    bool has_nan = false;
    bool numeric = true;
    for (const auto& k : keys) {
        if (k == "nan") {
            has_nan = true;
            continue;
        }
        levels.push_back(k);
        if (!csv::parse_number(k)) numeric = false;
    }
    if (numeric) {
        std::stable_sort(levels.begin(), levels.end(), [](const std::string& a, const std::string& b) {
            const double x = *csv::parse_number(a);
            const double y = *csv::parse_number(b);
            return x != y ? x < y : a < b;
        });
    } else {
        std::sort(levels.begin(), levels.end());
    }
    if (has_nan) levels.emplace_back("nan");
    return levels;
}

std::string group_label(const Column& c, std::size_t row) {
    auto l = cell_label(c, row);
    return l ? *l : std::string("nan");
}

std::string describe(std::string_view y, std::string_view g) {
    return std::string(y) + " by " + std::string(g);
}

} // namespace

std::string_view to_string(PlotKind kind) noexcept {
    switch (kind) {
    case PlotKind::hist: return "hist";
    case PlotKind::mu: return "mu";
    case PlotKind::std: return "std";
    case PlotKind::size: return "size";
    case PlotKind::corr: return "corr";
    case PlotKind::box: return "box";
    case PlotKind::gbox: return "gbox";
    case PlotKind::tstat_bars: return "tstat_bars";
    }
    return "?";
}

PlotKind plot_kind_from_string(std::string_view name) {
    for (PlotKind k : {PlotKind::hist, PlotKind::mu, PlotKind::std, PlotKind::size, PlotKind::corr, PlotKind::box,
                       PlotKind::gbox, PlotKind::tstat_bars}) {
        if (to_string(k) == name) return k;
    }
    throw UsageError("unknown plot kind '" + std::string(name) + "' (hist, mu, std, size, box, gbox, corr)");
}

// ---------------------------------------------------------------------------
// Builders

PlotSpec build_hist(const Frame& frame, std::string_view column, std::size_t bins) {
    if (bins == 0) throw UsageError("histogram needs at least one bin");
    const auto values = valid_values(frame, column);
    if (values.empty()) throw DataError("column '" + std::string(column) + "' has no valid cells to plot");

    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    double lo = *mn;
    double hi = *mx;
    if (lo == hi) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double width = (hi - lo) / static_cast<double>(bins);
    HistSeries h;
    h.edges.resize(bins + 1);
    for (std::size_t i = 0; i < bins; ++i) h.edges[i] = lo + static_cast<double>(i) * width;
    h.edges[bins] = hi;
    h.counts.assign(bins, 0);
    for (double v : values) {
        auto idx = static_cast<std::size_t>(std::clamp(std::floor((v - lo) / width), 0.0, static_cast<double>(bins - 1)));
        // The division can land one bin off near an edge.
        if (idx > 0 && v < h.edges[idx]) --idx;
        else if (idx + 1 < bins && v >= h.edges[idx + 1]) ++idx;
        ++h.counts[idx];
    }

    PlotSpec spec;
    spec.kind = PlotKind::hist;
    spec.title = "Histogram of " + std::string(column);
    spec.x_label = std::string(column);
    spec.y_label = "count";
    spec.replicate = frame.replicate;
    spec.series = std::move(h);
    return spec;
}

PlotSpec build_group_bar(const Frame& frame, std::string_view y, std::string_view group, PlotKind statistic) {
    if (statistic != PlotKind::mu && statistic != PlotKind::std && statistic != PlotKind::size) {
        throw UsageError("bar statistic must be mu, std or size");
    }
    if (statistic != PlotKind::size && y.empty()) throw UsageError("mu and std bars need a y column");
    const Column& g = frame.column(group);
    std::vector<double> yv;
    if (!y.empty()) yv = numeric_values(frame.column(y));

    std::map<std::string, std::vector<double>> by_level;
    std::map<std::string, std::size_t> sizes;
    for (std::size_t r = 0; r < g.size(); ++r) {
        const std::string level = group_label(g, r);
        ++sizes[level];
        auto& bucket = by_level[level];
        if (!yv.empty() && !std::isnan(yv[r])) bucket.push_back(yv[r]);
    }
    if (sizes.empty()) throw DataError("no groups to plot");

    std::vector<std::string> keys;
    for (const auto& [k, v] : sizes) keys.push_back(k);
    BarSeries bars;
    for (const auto& level : ordered_levels(keys)) {
        const auto& v = by_level[level];
        double value = kNaN;
        if (statistic == PlotKind::size) {
            value = static_cast<double>(sizes[level]);
        } else if (!v.empty()) {
            const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
            if (statistic == PlotKind::mu) {
                value = mean;
            } else {
                double ss = 0.0;
                for (double x : v) ss += (x - mean) * (x - mean);
                value = std::sqrt(ss / static_cast<double>(v.size()));
            }
        }
        bars.groups.push_back(level);
        bars.values.push_back(value);
    }

    PlotSpec spec;
    spec.kind = statistic;
    spec.x_label = std::string(group);
    if (statistic == PlotKind::size) {
        spec.title = "Group sizes by " + std::string(group);
        spec.y_label = "rows";
    } else {
        spec.title = (statistic == PlotKind::mu ? "Mean of " : "Std of ") + describe(y, group);
        spec.y_label = std::string(y);
    }
    spec.replicate = frame.replicate;
    spec.series = std::move(bars);
    return spec;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) return kNaN;
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

BoxSummary box_summary(std::string label, std::vector<double> values) {
    std::erase_if(values, [](double v) { return std::isnan(v); });
    std::sort(values.begin(), values.end());
    BoxSummary b;
    b.label = std::move(label);
    b.count = values.size();
    if (values.empty()) {
        b.whisker_low = b.q1 = b.med = b.q3 = b.whisker_high = kNaN;
        return b;
    }
    b.q1 = quantile_sorted(values, 0.25);
    b.med = quantile_sorted(values, 0.5);
    b.q3 = quantile_sorted(values, 0.75);
    const double iqr = b.q3 - b.q1;
    const double fence_lo = b.q1 - 1.5 * iqr;
    const double fence_hi = b.q3 + 1.5 * iqr;
    b.whisker_low = b.q1;
    b.whisker_high = b.q3;
    for (double v : values) {
        if (v < fence_lo || v > fence_hi) {
            b.outliers.push_back(v);
            continue;
        }
        b.whisker_low = std::min(b.whisker_low, v);
        b.whisker_high = std::max(b.whisker_high, v);
    }
    return b;
}

PlotSpec build_box(const Frame& frame, std::string_view y, std::string_view group) {
    const auto yv = numeric_values(frame.column(y));
    BoxSeries series;
    if (group.empty()) {
        series.boxes.push_back(box_summary(std::string(y), yv));
    } else {
        const Column& g = frame.column(group);
        std::map<std::string, std::vector<double>> by_level;
        for (std::size_t r = 0; r < g.size(); ++r) {
            if (!std::isnan(yv[r])) by_level[group_label(g, r)].push_back(yv[r]);
        }
        std::vector<std::string> keys;
        for (const auto& [k, v] : by_level) keys.push_back(k);
        for (const auto& level : ordered_levels(keys)) series.boxes.push_back(box_summary(level, by_level[level]));
    }
    if (series.boxes.empty() || std::all_of(series.boxes.begin(), series.boxes.end(),
                                            [](const BoxSummary& b) { return b.count == 0; })) {
        throw DataError("column '" + std::string(y) + "' has no valid cells to plot");
    }
    PlotSpec spec;
    spec.kind = PlotKind::box;
    spec.title = group.empty() ? "Boxplot of " + std::string(y) : "Boxplot of " + describe(y, group);
    spec.x_label = std::string(group);
    spec.y_label = std::string(y);
    spec.replicate = frame.replicate;
    spec.series = std::move(series);
    return spec;
}

PlotSpec build_gbox(const Frame& frame, std::string_view y, std::string_view x, std::size_t groups) {
    if (groups == 0) throw UsageError("gbox needs at least one group");
    const auto yv = numeric_values(frame.column(y));
    const auto xv = numeric_values(frame.column(x));
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < yv.size(); ++r) {
        if (!std::isnan(yv[r]) && !std::isnan(xv[r])) rows.push_back(r);
    }
    if (rows.empty()) throw DataError("no rows with both '" + std::string(x) + "' and '" + std::string(y) + "'");
    std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) { return xv[a] < xv[b]; });

    PlotSpec spec;
    std::size_t distinct = 1;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (xv[rows[i]] != xv[rows[i - 1]]) ++distinct;
    }
    std::size_t g = groups;
    if (distinct < g) {
        g = distinct;
        spec.warnings.push_back("'" + std::string(x) + "' has only " + std::to_string(distinct) +
                                " distinct values; using " + std::to_string(g) + " groups");
    }

    BoxSeries series;
    const std::size_t m = rows.size();
    for (std::size_t i = 0; i < g; ++i) {
        const std::size_t begin = i * m / g;
        const std::size_t end = (i + 1) * m / g;
        std::vector<double> ys;
        for (std::size_t t = begin; t < end; ++t) ys.push_back(yv[rows[t]]);
        const double lo = xv[rows[begin]];
        const double hi = xv[rows[end - 1]];
        BoxSummary b = box_summary("[" + csv::format_number(lo) + ", " + csv::format_number(hi) + "]", std::move(ys));
        b.x_low = lo;
        b.x_high = hi;
        series.boxes.push_back(std::move(b));
    }

    spec.kind = PlotKind::gbox;
    spec.title = "Grouped boxplot of " + describe(y, x);
    spec.x_label = std::string(x);
    spec.y_label = std::string(y);
    spec.replicate = frame.replicate;
    spec.series = std::move(series);
    return spec;
}

PlotSpec build_corr(std::vector<std::string> labels, Matrix values) {
    PlotSpec spec;
    spec.kind = PlotKind::corr;
    spec.title = "Correlation matrix";
    spec.series = MatrixSeries{std::move(labels), std::move(values)};
    return spec;
}

PlotSpec build_corr(const Frame& frame, const std::vector<std::string>& columns) {
    if (columns.size() < 2) throw UsageError("correlation needs at least two columns");
    PlotSpec spec = build_corr(columns, pearson_matrix(frame, columns));
    spec.replicate = frame.replicate;
    return spec;
}

PlotSpec build_tstat_bars(const RegressionTable& table) {
    TStatSeries s;
    for (const auto& r : table.rows) {
        s.names.push_back(r.name);
        s.t_stats.push_back(r.t_stat);
        s.p_values.push_back(r.p_value);
        s.significant.push_back(r.p_value < 5.0);
    }
    PlotSpec spec;
    spec.kind = PlotKind::tstat_bars;
    spec.title = "tStat by coefficient (" + std::string(to_string(table.kind)) + ")";
    spec.x_label = "coefficient";
    spec.y_label = "tStat";
    spec.series = std::move(s);
    return spec;
}

PlotSpec build_plot(const Frame& frame, const PlotRequest& request) {
    const auto& c = request.columns;
    auto need = [&](std::size_t lo, std::size_t hi) {
        if (c.size() < lo || c.size() > hi) {
            throw UsageError("plot " + std::string(to_string(request.kind)) + " takes " + std::to_string(lo) +
                             (lo == hi ? "" : " to " + std::to_string(hi)) + " column(s)");
        }
    };
    switch (request.kind) {
    case PlotKind::hist: need(1, 1); return build_hist(frame, c[0], request.bins);
    case PlotKind::mu:
    case PlotKind::std: need(2, 2); return build_group_bar(frame, c[0], c[1], request.kind);
    case PlotKind::size:
        need(1, 2);
        return c.size() == 1 ? build_group_bar(frame, {}, c[0], PlotKind::size)
                             : build_group_bar(frame, c[0], c[1], PlotKind::size);
    case PlotKind::box: need(1, 2); return build_box(frame, c[0], c.size() == 2 ? std::string_view(c[1]) : std::string_view());
    case PlotKind::gbox: need(2, 2); return build_gbox(frame, c[0], c[1], request.groups);
    case PlotKind::corr: return build_corr(frame, c);
    case PlotKind::tstat_bars: break;
    }
    throw UsageError("tstat bars come from a model task");
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json plot_json(const PlotSpec& spec) {
    nlohmann::json series = std::visit(
        [](const auto& s) -> nlohmann::json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, HistSeries>) {
                return {{"edges", s.edges}, {"counts", s.counts}};
            } else if constexpr (std::is_same_v<T, BarSeries>) {
                return {{"groups", s.groups}, {"values", s.values}};
            } else if constexpr (std::is_same_v<T, BoxSeries>) {
                nlohmann::json boxes = nlohmann::json::array();
                for (const auto& b : s.boxes) {
                    nlohmann::json j = {{"label", b.label},         {"count", b.count}, {"whisker_low", b.whisker_low},
                                        {"q1", b.q1},               {"med", b.med},     {"q3", b.q3},
                                        {"whisker_high", b.whisker_high}, {"outliers", b.outliers}};
                    if (b.x_low) j["x_low"] = *b.x_low;
                    if (b.x_high) j["x_high"] = *b.x_high;
                    boxes.push_back(std::move(j));
                }
                return {{"boxes", std::move(boxes)}};
            } else if constexpr (std::is_same_v<T, MatrixSeries>) {
                return {{"labels", s.labels}, {"matrix", s.values}};
            } else {
                return {{"names", s.names}, {"t_stats", s.t_stats}, {"p_values", s.p_values}, {"significant", s.significant}};
            }
        },
        spec.series);
    return {{"kind", to_string(spec.kind)}, {"title", spec.title},   {"x_label", spec.x_label},
            {"y_label", spec.y_label},      {"k", spec.replicate},   {"series", std::move(series)},
            {"warnings", spec.warnings}};
}

// ---------------------------------------------------------------------------
// SVG

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 70;
constexpr double kPlotW = kWidth - kLeft - kRight;
constexpr double kPlotH = kHeight - kTop - kBottom;
constexpr const char* kBarColor = "#4878a8";
constexpr const char* kSignificant = "#d62728";
constexpr const char* kInsignificant = "#9467bd";

std::string num(double v) { return format_fixed(v, 2); }

std::string escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string tick_label(double v, double range) {
    int decimals = 0;
    if (range > 0 && std::isfinite(range)) decimals = std::clamp(2 - static_cast<int>(std::floor(std::log10(range))), 0, 6);
    return format_fixed(v, decimals);
}

class Canvas {
public:
    explicit Canvas(const PlotSpec& spec) {
        out_ += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\" "
                "font-family=\"sans-serif\">\n";
        out_ += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"400\" fill=\"#ffffff\"/>\n";
        text(kWidth / 2, 24, spec.title, 15, "middle");
        if (spec.replicate > 0) text(kWidth - kRight, 24, "k = " + std::to_string(spec.replicate), 11, "end");
        text(kLeft + kPlotW / 2, kHeight - 12, spec.x_label, 12, "middle");
        out_ += "<text x=\"16\" y=\"" + num(kTop + kPlotH / 2) + "\" font-size=\"12\" text-anchor=\"middle\" "
                "transform=\"rotate(-90 16 " + num(kTop + kPlotH / 2) + ")\">" + escape(spec.y_label) + "</text>\n";
    }

    void axes() {
        line(kLeft, kTop, kLeft, kTop + kPlotH, "#000000");
        line(kLeft, kTop + kPlotH, kLeft + kPlotW, kTop + kPlotH, "#000000");
    }

    void y_axis(double lo, double hi) {
        lo_ = lo;
        hi_ = hi;
        for (int i = 0; i <= 4; ++i) {
            const double v = lo + (hi - lo) * i / 4.0;
            const double y = sy(v);
            line(kLeft - 4, y, kLeft, y, "#000000");
            text(kLeft - 6, y + 4, tick_label(v, hi - lo), 10, "end");
        }
    }

    [[nodiscard]] double sy(double v) const { return kTop + kPlotH * (1.0 - (v - lo_) / (hi_ - lo_)); }

    void line(double x1, double y1, double x2, double y2, const char* color) {
        out_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) +
                "\" stroke=\"" + color + "\" stroke-width=\"1\"/>\n";
    }

    void rect(double x, double y, double w, double h, const std::string& fill, const char* stroke = nullptr) {
        out_ += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(std::max(w, 0.0)) + "\" height=\"" +
                num(std::max(h, 0.0)) + "\" fill=\"" + fill + "\"";
        if (stroke != nullptr) out_ += std::string(" stroke=\"") + stroke + "\"";
        out_ += "/>\n";
    }

    void circle(double x, double y, double r) {
        out_ += "<circle cx=\"" + num(x) + "\" cy=\"" + num(y) + "\" r=\"" + num(r) +
                "\" fill=\"none\" stroke=\"#000000\"/>\n";
    }

    void text(double x, double y, std::string_view s, int size, const char* anchor) {
        out_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + std::to_string(size) +
                "\" text-anchor=\"" + anchor + "\">" + escape(s) + "</text>\n";
    }

    void category_label(double x, std::string_view s, std::size_t count) {
        if (count > 12) {
            const double y = kTop + kPlotH + 10;
            out_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"9\" text-anchor=\"end\" transform=\"rotate(-45 " +
                    num(x) + " " + num(y) + ")\">" + escape(s) + "</text>\n";
        } else {
            text(x, kTop + kPlotH + 14, s, 10, "middle");
        }
    }

    void no_data() { text(kLeft + kPlotW / 2, kTop + kPlotH / 2, "no data", 14, "middle"); }

    std::string finish() {
        out_ += "</svg>\n";
        return std::move(out_);
    }

private:
    std::string out_;
    double lo_ = 0.0, hi_ = 1.0;
};

std::pair<double, double> value_range(const std::vector<double>& values, bool include_zero) {
    double lo = include_zero ? 0.0 : std::numeric_limits<double>::infinity();
    double hi = include_zero ? 0.0 : -std::numeric_limits<double>::infinity();
    for (double v : values) {
        if (!std::isfinite(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!std::isfinite(lo)) return {0.0, 1.0};
    if (lo == hi) return {lo - 0.5, hi + 0.5};
    const double pad = 0.05 * (hi - lo);
    return {include_zero && lo == 0.0 ? 0.0 : lo - pad, include_zero && hi == 0.0 ? 0.0 : hi + pad};
}

void draw_bars(Canvas& c, const std::vector<std::string>& labels, const std::vector<double>& values,
               const std::vector<std::string>& colors) {
    const auto [lo, hi] = value_range(values, true);
    c.y_axis(lo, hi);
    const double slot = kPlotW / static_cast<double>(labels.size());
    const double zero = c.sy(0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double x = kLeft + slot * static_cast<double>(i);
        if (std::isfinite(values[i])) {
            const double y = c.sy(values[i]);
            c.rect(x + slot * 0.1, std::min(y, zero), slot * 0.8, std::fabs(zero - y), colors[i]);
        }
        c.category_label(x + slot / 2, labels[i], labels.size());
    }
    c.line(kLeft, zero, kLeft + kPlotW, zero, "#000000");
}

std::string heat_color(double v) {
    if (std::isnan(v)) return "#cccccc";
    v = std::clamp(v, -1.0, 1.0);
    // white at 0, blue at -1, red at +1
    const double t = std::fabs(v);
    const int r0 = v < 0 ? 59 : 180, g0 = v < 0 ? 76 : 4, b0 = v < 0 ? 192 : 38;
    auto mix = [&](int c) { return static_cast<int>(std::lround(255.0 + (c - 255.0) * t)); };
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", mix(r0), mix(g0), mix(b0));
    return buf;
}

} // namespace

std::string render_svg(const PlotSpec& spec) {
    Canvas c(spec);
    c.axes();

    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, HistSeries>) {
                if (s.counts.empty()) return c.no_data();
                std::vector<double> counts(s.counts.begin(), s.counts.end());
                const auto [lo, hi] = value_range(counts, true);
                c.y_axis(lo, hi);
                const double w = kPlotW / static_cast<double>(s.counts.size());
                for (std::size_t i = 0; i < s.counts.size(); ++i) {
                    const double y = c.sy(counts[i]);
                    c.rect(kLeft + w * static_cast<double>(i), y, w, kTop + kPlotH - y, kBarColor, "#ffffff");
                }
                const double range = s.edges.back() - s.edges.front();
                c.text(kLeft, kTop + kPlotH + 14, tick_label(s.edges.front(), range), 10, "middle");
                c.text(kLeft + kPlotW, kTop + kPlotH + 14, tick_label(s.edges.back(), range), 10, "middle");
            } else if constexpr (std::is_same_v<T, BarSeries>) {
                if (s.groups.empty()) return c.no_data();
                draw_bars(c, s.groups, s.values, std::vector<std::string>(s.groups.size(), kBarColor));
            } else if constexpr (std::is_same_v<T, TStatSeries>) {
                if (s.names.empty()) return c.no_data();
                std::vector<std::string> colors;
                for (bool sig : s.significant) colors.emplace_back(sig ? kSignificant : kInsignificant);
                std::vector<double> shown = s.t_stats;
                draw_bars(c, s.names, shown, colors);
            } else if constexpr (std::is_same_v<T, BoxSeries>) {
                std::vector<double> all;
                for (const auto& b : s.boxes) {
                    if (b.count == 0) continue;
                    all.push_back(b.whisker_low);
                    all.push_back(b.whisker_high);
                    all.insert(all.end(), b.outliers.begin(), b.outliers.end());
                }
                if (all.empty()) return c.no_data();
                const auto [lo, hi] = value_range(all, false);
                c.y_axis(lo, hi);
                const double slot = kPlotW / static_cast<double>(s.boxes.size());
                for (std::size_t i = 0; i < s.boxes.size(); ++i) {
                    const auto& b = s.boxes[i];
                    const double x = kLeft + slot * static_cast<double>(i);
                    const double mid = x + slot / 2;
                    c.category_label(mid, b.label, s.boxes.size());
                    if (b.count == 0) continue;
                    c.line(mid, c.sy(b.whisker_low), mid, c.sy(b.q1), "#000000");
                    c.line(mid, c.sy(b.q3), mid, c.sy(b.whisker_high), "#000000");
                    c.line(x + slot * 0.3, c.sy(b.whisker_low), x + slot * 0.7, c.sy(b.whisker_low), "#000000");
                    c.line(x + slot * 0.3, c.sy(b.whisker_high), x + slot * 0.7, c.sy(b.whisker_high), "#000000");
                    c.rect(x + slot * 0.15, c.sy(b.q3), slot * 0.7, c.sy(b.q1) - c.sy(b.q3), "#a6c8e8", "#000000");
                    c.line(x + slot * 0.15, c.sy(b.med), x + slot * 0.85, c.sy(b.med), "#000000");
                    for (double o : b.outliers) c.circle(mid, c.sy(o), 2.5);
                }
            } else {
                const std::size_t p = s.labels.size();
                if (p == 0) return c.no_data();
                const double cell = std::min(kPlotW, kPlotH) / static_cast<double>(p);
                for (std::size_t a = 0; a < p; ++a) {
                    c.text(kLeft - 6, kTop + cell * (static_cast<double>(a) + 0.5) + 4, s.labels[a], 10, "end");
                    for (std::size_t b = 0; b < p; ++b) {
                        const double v = s.values[a][b];
                        const double x = kLeft + cell * static_cast<double>(b);
                        const double y = kTop + cell * static_cast<double>(a);
                        c.rect(x, y, cell, cell, heat_color(v), "#ffffff");
                        if (p <= 12) c.text(x + cell / 2, y + cell / 2 + 4, format_fixed(v, 2), 10, "middle");
                    }
                    c.category_label(kLeft + cell * (static_cast<double>(a) + 0.5), s.labels[a], p);
                }
            }
        },
        spec.series);
    return c.finish();
}

// ---------------------------------------------------------------------------
// Plot task

PlotAnalyzer::PlotAnalyzer(PlotRequest request) : request_(std::move(request)) {
    if (request_.kind == PlotKind::tstat_bars) throw UsageError("tstat bars come from a model task");
}

std::any PlotAnalyzer::summarize(const ReplicateContext& ctx) const { return build_plot(ctx.frame, request_); }

void PlotAnalyzer::merge(std::size_t k, std::any summary) {
    latest_ = std::any_cast<PlotSpec>(std::move(summary));
    latest_->replicate = k;
}

nlohmann::json PlotAnalyzer::snapshot() const {
    nlohmann::json j = latest_ ? plot_json(*latest_) : nlohmann::json::object();
    j["k"] = latest_ ? latest_->replicate : 0;
    return j;
}

std::string PlotAnalyzer::render_text() const {
    if (!latest_) return "no plot yet\n";
    return "plot " + std::string(to_string(latest_->kind)) + " updated at k = " + std::to_string(latest_->replicate) + "\n";
}

} // namespace pondstat
