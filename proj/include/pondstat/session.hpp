#pragma once

#include "pondstat/engine.hpp"
#include "pondstat/model.hpp"
#include "pondstat/plotdata.hpp"
#include "pondstat/pump.hpp"
#include "pondstat/source.hpp"
#include "pondstat/transform.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace pondstat {

struct SessionSettings {
    SamplingPlan plan;
    std::size_t threads = 1;
    /// Adds elapsed_s to emissions. Off by default so output is reproducible.
    bool timing = false;
};

/// A running or finished analysis. Emissions are JSON documents, one per
/// merged replicate, followed by exactly one terminal event.
class Task {
public:
    /// Called on the task's thread after each emission is logged.
    using Hook = std::function<void(const Task& task, std::size_t k, TaskState state, const Analyzer& analyzer)>;

    struct Setup {
        std::size_t id = 0;
        std::string kind;
        std::string command;
        DatasetHandle handle;
        SamplingPlan plan;
        TransformProgram program;
        std::unique_ptr<Analyzer> analyzer;
        std::size_t threads = 1;
        bool timing = false;
        std::shared_ptr<const LineIndex> index;
        Hook hook;
    };

    explicit Task(Setup setup);
    ~Task();
    Task(const Task&) = delete;
    Task& operator=(const Task&) = delete;

    [[nodiscard]] std::size_t id() const noexcept { return id_; }
    [[nodiscard]] const std::string& kind() const noexcept { return kind_; }
    [[nodiscard]] const std::string& command() const noexcept { return command_; }
    [[nodiscard]] TaskState state() const;
    [[nodiscard]] std::string error() const;

    /// Emission JSON texts so far (without the terminal event).
    [[nodiscard]] std::vector<std::string> emissions() const;
    /// The terminal event, once the task has finished.
    [[nodiscard]] std::optional<std::string> terminal_event() const;
    /// Blocks until more than `seen` emissions exist, the task is terminal,
    /// or the timeout passes. Returns emissions [seen, end).
    std::vector<std::string> wait_emissions(std::size_t seen, std::chrono::milliseconds timeout) const;
    /// Blocks until the task is terminal.
    void wait() const;

    [[nodiscard]] std::string latest_text() const;
    [[nodiscard]] std::optional<nlohmann::json> latest_plot() const;

    /// No emission follows once this returns. No-op on a finished task.
    TaskState cancel();

private:
    void run(DatasetHandle handle, SamplingPlan plan, TransformProgram program, std::size_t threads,
             std::shared_ptr<const LineIndex> index);
    void finish(TaskState state, std::string error);

    std::size_t id_;
    std::string kind_;
    std::string command_;
    std::unique_ptr<Analyzer> analyzer_;
    bool timing_;
    Hook hook_;
    std::chrono::steady_clock::time_point started_;

    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    TaskState state_ = TaskState::running;
    std::size_t last_k_ = 0;
    std::vector<std::string> emissions_;
    std::optional<std::string> terminal_;
    std::string error_;
    std::string latest_text_;
    std::optional<nlohmann::json> latest_plot_;
    std::atomic<bool> cancel_flag_{false};

    std::jthread thread_; // last, so it joins before the rest is destroyed
};

struct CommandResult {
    enum class Action { none, task, quit };
    Action action = Action::none;
    std::string message;
    std::optional<std::size_t> task_id;
};

/// One dataset plus the analyst's current codebook, transform program and
/// sampling settings. Commands use the REPL grammar (see `command_help`).
/// A rejected command throws UsageError and leaves the session unchanged.
class Session {
public:
    Session(DatasetHandle handle, SessionSettings settings);
    ~Session();
    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    CommandResult execute(std::string_view line, const Task::Hook& hook = {});

    [[nodiscard]] std::shared_ptr<Task> task(std::size_t id) const;
    [[nodiscard]] std::vector<std::shared_ptr<Task>> tasks() const;
    /// Returns false for an unknown id.
    bool cancel(std::size_t id);
    void cancel_all();

    [[nodiscard]] nlohmann::json describe() const;
    /// Canonical text of everything a command can change.
    [[nodiscard]] std::string fingerprint() const;

    [[nodiscard]] DatasetHandle handle() const;
    [[nodiscard]] SessionSettings settings() const;
    [[nodiscard]] TransformProgram program() const;

private:
    CommandResult start(std::string kind, std::string command, std::unique_ptr<Analyzer> analyzer,
                        const Task::Hook& hook);
    std::shared_ptr<const LineIndex> index_for(const SamplingPlan& plan);

    mutable std::mutex mu_;
    DatasetHandle handle_;
    std::vector<std::string> qlist_;
    std::vector<std::string> drop_;
    SessionSettings settings_;
    TransformProgram program_;
    std::shared_ptr<const LineIndex> index_;
    std::size_t next_id_ = 1;
    std::map<std::size_t, std::shared_ptr<Task>> tasks_;
};

std::string command_help();

/// Splits a column list on commas and blanks.
std::vector<std::string> split_names(std::string_view text);

} // namespace pondstat
