#pragma once

#include "pondstat/frame.hpp"
#include "pondstat/pump.hpp"
#include "pondstat/source.hpp"
#include "pondstat/transform.hpp"

#include <nlohmann/json.hpp>

#include <any>
#include <atomic>
#include <cstddef>
#include <functional>
#include <string>
#include <string_view>

namespace pondstat {

enum class TaskState { running, stopped_by_se, stopped_by_k, cancelled, failed };

std::string_view to_string(TaskState state) noexcept;
[[nodiscard]] constexpr bool is_terminal(TaskState s) noexcept { return s != TaskState::running; }

/// What an analysis sees for one replicate: the transformed frame and a way
/// to draw a fresh, equally transformed frame for out-of-sample checks.
struct ReplicateContext {
    std::size_t k;
    const Frame& frame;
    std::function<Frame()> draw_holdout;
};

/// One kind of per-replicate analysis. `summarize` runs on worker threads and
/// must not touch shared state; `merge` is called once per replicate, in
/// increasing k, from a single thread.
class Analyzer {
public:
    virtual ~Analyzer() = default;

    [[nodiscard]] virtual std::string_view kind() const noexcept = 0;
    [[nodiscard]] virtual std::any summarize(const ReplicateContext& ctx) const = 0;
    virtual void merge(std::size_t k, std::any summary) = 0;

    /// Aggregate so far as JSON (includes `k` and `n`).
    [[nodiscard]] virtual nlohmann::json snapshot() const = 0;
    /// Aggregate so far as a console table.
    [[nodiscard]] virtual std::string render_text() const = 0;
    /// True when every tracked standard error (display units) is below target.
    [[nodiscard]] virtual bool se_below(double /*target*/) const { return false; }
};

struct RunOptions {
    std::size_t threads = 1;
    const std::atomic<bool>* cancel = nullptr;
    const LineIndex* index = nullptr;
};

/// Called after replicate k is merged with the state the run is in after it
/// (running, or the terminal state when k is the last). Returning false
/// cancels the run.
using MergeCallback = std::function<bool(std::size_t k, TaskState state)>;

/// Draws, transforms and summarizes replicates 1..k_max (possibly on several
/// threads) and merges them strictly in replicate order, so results do not
/// depend on the thread count. Stops early when the plan's SE target is met.
/// Returns the terminal state; exceptions from draws or analyses propagate.
TaskState run_replicates(const DatasetHandle& handle, const SamplingPlan& plan, const TransformProgram& program,
                         Analyzer& analyzer, const MergeCallback& on_merged, const RunOptions& options = {});

} // namespace pondstat
