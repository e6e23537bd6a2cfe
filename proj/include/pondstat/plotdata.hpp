#pragma once

#include "pondstat/engine.hpp"
#include "pondstat/frame.hpp"
#include "pondstat/model.hpp"
#include "pondstat/stats.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pondstat {

enum class PlotKind { hist, mu, std, size, corr, box, gbox, tstat_bars };

std::string_view to_string(PlotKind kind) noexcept;
/// Throws UsageError for an unknown name.
PlotKind plot_kind_from_string(std::string_view name);

/// `counts[i]` covers [edges[i], edges[i+1]); the last bin also holds the maximum.
struct HistSeries {
    std::vector<double> edges;
    std::vector<std::uint64_t> counts;
};

struct BarSeries {
    std::vector<std::string> groups;
    std::vector<double> values;
};

struct BoxSummary {
    std::string label;
    std::size_t count = 0;
    double whisker_low = 0, q1 = 0, med = 0, q3 = 0, whisker_high = 0;
    std::vector<double> outliers;
    // Range of the grouping variable (gbox only).
    std::optional<double> x_low, x_high;
};

struct BoxSeries {
    std::vector<BoxSummary> boxes;
};

struct MatrixSeries {
    std::vector<std::string> labels;
    Matrix values;
};

struct TStatSeries {
    std::vector<std::string> names;
    std::vector<double> t_stats;
    std::vector<double> p_values;
    std::vector<bool> significant; // pValue < 5
};

using PlotSeries = std::variant<HistSeries, BarSeries, BoxSeries, MatrixSeries, TStatSeries>;

struct PlotSpec {
    PlotKind kind = PlotKind::hist;
    std::string title;
    std::string x_label;
    std::string y_label;
    std::size_t replicate = 0;
    PlotSeries series;
    std::vector<std::string> warnings;
};

inline constexpr std::size_t kDefaultBins = 30;
inline constexpr std::size_t kDefaultGroups = 10;

PlotSpec build_hist(const Frame& frame, std::string_view column, std::size_t bins = kDefaultBins);

/// One bar per level of `group` (missing as `nan`, placed last). `y` may be
/// empty for the size statistic.
PlotSpec build_group_bar(const Frame& frame, std::string_view y, std::string_view group, PlotKind statistic);

/// Five-number summaries with 1.5 IQR whiskers, per level of `group` or for
/// the whole column when `group` is empty.
PlotSpec build_box(const Frame& frame, std::string_view y, std::string_view group = {});

/// Boxplots of y over `groups` equal-count slices of x.
PlotSpec build_gbox(const Frame& frame, std::string_view y, std::string_view x, std::size_t groups = kDefaultGroups);

PlotSpec build_corr(const Frame& frame, const std::vector<std::string>& columns);
PlotSpec build_corr(std::vector<std::string> labels, Matrix values);

PlotSpec build_tstat_bars(const RegressionTable& table);

/// Linear-interpolation quantile of sorted data (the usual "type 7").
double quantile_sorted(const std::vector<double>& sorted, double p);

/// Box summary of the valid values in `values`; NaNs are ignored.
BoxSummary box_summary(std::string label, std::vector<double> values);

nlohmann::json plot_json(const PlotSpec& spec);

/// Standalone 640x400 SVG; identical specs give identical bytes.
std::string render_svg(const PlotSpec& spec);

/// What a plot task draws each replicate.
struct PlotRequest {
    PlotKind kind = PlotKind::hist;
    std::vector<std::string> columns; // hist: {col}; bars: {y, g} or {g}; box: {y[, g]}; gbox: {y, x}; corr: cols
    std::size_t bins = kDefaultBins;
    std::size_t groups = kDefaultGroups;
};

PlotSpec build_plot(const Frame& frame, const PlotRequest& request);

/// Plot of the latest replicate; earlier replicates are not pooled.
class PlotAnalyzer final : public Analyzer {
public:
    explicit PlotAnalyzer(PlotRequest request);

    std::string_view kind() const noexcept override { return "plot"; }
    std::any summarize(const ReplicateContext& ctx) const override;
    void merge(std::size_t k, std::any summary) override;
    nlohmann::json snapshot() const override;
    std::string render_text() const override;

    [[nodiscard]] const std::optional<PlotSpec>& latest() const noexcept { return latest_; }

private:
    PlotRequest request_;
    std::optional<PlotSpec> latest_;
};

} // namespace pondstat
