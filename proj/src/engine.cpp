#include "pondstat/engine.hpp"

#include <condition_variable>
#include <exception>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

namespace pondstat {

std::string_view to_string(TaskState state) noexcept {
    switch (state) {
    case TaskState::running: return "running";
    case TaskState::stopped_by_se: return "stopped_by_se";
    case TaskState::stopped_by_k: return "stopped_by_k";
    case TaskState::cancelled: return "cancelled";
    case TaskState::failed: return "failed";
    }
    return "?";
}

namespace {

std::any compute_replicate(const DatasetHandle& handle, const SamplingPlan& plan, const TransformProgram& program,
                           const Analyzer& analyzer, std::size_t k, const LineIndex* index) {
    const Frame frame = apply_program(draw_replicate(handle, plan, k, index), program);
    ReplicateContext ctx{k, frame, [&] { return apply_program(draw_holdout(handle, plan, k, index), program); }};
    return analyzer.summarize(ctx);
}

TaskState state_after(const Analyzer& analyzer, const SamplingPlan& plan, std::size_t k) {
    if (plan.se_target && analyzer.se_below(*plan.se_target)) return TaskState::stopped_by_se;
    if (k >= plan.k_max) return TaskState::stopped_by_k;
    return TaskState::running;
}

bool cancelled(const RunOptions& options) {
    return options.cancel != nullptr && options.cancel->load(std::memory_order_acquire);
}

struct Slot {
    std::any summary;
    std::exception_ptr error;
};

} // namespace

TaskState run_replicates(const DatasetHandle& handle, const SamplingPlan& plan, const TransformProgram& program,
                         Analyzer& analyzer, const MergeCallback& on_merged, const RunOptions& options) {
    plan.validate();

    if (options.threads <= 1) {
        for (std::size_t k = 1; k <= plan.k_max; ++k) {
            if (cancelled(options)) return TaskState::cancelled;
            analyzer.merge(k, compute_replicate(handle, plan, program, analyzer, k, options.index));
            const TaskState state = state_after(analyzer, plan, k);
            if (cancelled(options) || !on_merged(k, state)) return TaskState::cancelled;
            if (is_terminal(state)) return state;
        }
        return TaskState::stopped_by_k;
    }

    std::mutex mu;
    std::condition_variable cv;
    std::map<std::size_t, Slot> ready;
    std::size_t next_k = 1;
    std::size_t merged = 0;
    bool stop = false;
    const std::size_t lookahead = 2 * options.threads;

    auto worker = [&] {
        while (true) {
            std::size_t k = 0;
            {
                std::unique_lock lock(mu);
                cv.wait(lock, [&] { return stop || next_k <= merged + lookahead; });
                if (stop || next_k > plan.k_max) return;
                k = next_k++;
            }
            Slot slot;
            try {
                slot.summary = compute_replicate(handle, plan, program, analyzer, k, options.index);
            } catch (...) {
                slot.error = std::current_exception();
            }
            {
                std::lock_guard lock(mu);
                ready.emplace(k, std::move(slot));
            }
            cv.notify_all();
        }
    };

    std::vector<std::jthread> pool;
    auto shutdown = [&] {
        {
            std::lock_guard lock(mu);
            stop = true;
        }
        cv.notify_all();
        pool.clear(); // joins
    };

    const std::size_t workers = std::min(options.threads, plan.k_max);
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);

    TaskState result = TaskState::stopped_by_k;
    try {
        for (std::size_t k = 1; k <= plan.k_max; ++k) {
            Slot slot;
            {
                std::unique_lock lock(mu);
                cv.wait_for(lock, std::chrono::milliseconds(50), [&] { return ready.contains(k); });
                while (!ready.contains(k)) {
                    if (cancelled(options)) break;
                    cv.wait_for(lock, std::chrono::milliseconds(50), [&] { return ready.contains(k); });
                }
                if (!ready.contains(k)) {
                    result = TaskState::cancelled;
                    break;
                }
                slot = std::move(ready.at(k));
                ready.erase(k);
            }
            if (slot.error) std::rethrow_exception(slot.error);
            analyzer.merge(k, std::move(slot.summary));
            {
                std::lock_guard lock(mu);
                merged = k;
            }
            cv.notify_all();
            const TaskState state = state_after(analyzer, plan, k);
            if (cancelled(options) || !on_merged(k, state)) {
                result = TaskState::cancelled;
                break;
            }
            if (is_terminal(state)) {
                result = state;
                break;
            }
        }
    } catch (...) {
        shutdown();
        throw;
    }
    shutdown();
    return result;
}

} // namespace pondstat
