#include "pondstat/session.hpp"

#include "pondstat/csv.hpp"
#include "pondstat/error.hpp"
#include "pondstat/stats.hpp"
#include "pondstat/text_table.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>
#include <sstream>

namespace pondstat {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::pair<std::string_view, std::string_view> split_word(std::string_view s) {
    s = trim(s);
    std::size_t i = 0;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    return {s.substr(0, i), trim(s.substr(i))};
}

std::vector<std::string> words(std::string_view s) {
    std::vector<std::string> out;
    while (true) {
        auto [w, rest] = split_word(s);
        if (w.empty()) break;
        out.emplace_back(w);
        s = rest;
    }
    return out;
}

std::uint64_t parse_count(std::string_view text, std::string_view what) {
    std::uint64_t v = 0;
    const auto* end = text.data() + text.size();
    auto [p, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || p != end) throw UsageError(std::string(what) + " must be a non-negative integer, got '" + std::string(text) + "'");
    return v;
}

bool parse_switch(std::string_view text, std::string_view what) {
    if (text == "on" || text == "true" || text == "1") return true;
    if (text == "off" || text == "false" || text == "0") return false;
    throw UsageError(std::string(what) + " must be on or off");
}

std::optional<nlohmann::json> plot_of(const Analyzer& analyzer) {
    if (const auto* p = dynamic_cast<const PlotAnalyzer*>(&analyzer)) {
        if (p->latest()) return plot_json(*p->latest());
        return std::nullopt;
    }
    if (const auto* m = dynamic_cast<const ModelAnalyzer*>(&analyzer)) {
        return plot_json(build_tstat_bars(m->table(true)));
    }
    return std::nullopt;
}

} // namespace

std::vector<std::string> split_names(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string command_help() {
    return "commands:\n"
           "  stats [cols]                summary statistics (default: quantitative columns)\n"
           "  table [cols]                frequency tables (default: qualitative columns)\n"
           "  corr [cols]                 correlation matrix\n"
           "  app <col> <expr>            replace col by an expression of x\n"
           "  bin <col> <t1,..> <n0,..>   cut col at thresholds into named levels\n"
           "  ady <col> <l1,..>           dummy columns for the listed levels\n"
           "  qlist <cols>                set the quantitative columns\n"
           "  drop <cols>                 set the excluded columns\n"
           "  reset                       clear the transform program\n"
           "  ols <y> [~ <x,..>]          linear regression\n"
           "  logit <y> [~ <x,..>]        logistic regression\n"
           "  plot hist <col> [bins]      histogram\n"
           "  plot mu|std <y> <g>         bar chart of the group mean or std\n"
           "  plot size [y] <g>           bar chart of group sizes\n"
           "  plot box <y> [g]            boxplot\n"
           "  plot gbox <y> <x> [groups]  boxplots of y over slices of x\n"
           "  plot corr <cols>            correlation heatmap\n"
           "  set subsize|niter|seq|seed|se|threads|index|timing <value>\n"
           "  show | schema | size [exact] | program | tasks | stop [id] | help | quit\n";
}

// ---------------------------------------------------------------------------
// Task

Task::Task(Setup setup)
    : id_(setup.id),
      kind_(std::move(setup.kind)),
      command_(std::move(setup.command)),
      analyzer_(std::move(setup.analyzer)),
      timing_(setup.timing),
      hook_(std::move(setup.hook)),
      started_(std::chrono::steady_clock::now()) {
    thread_ = std::jthread([this, handle = std::move(setup.handle), plan = setup.plan,
                            program = std::move(setup.program), threads = setup.threads,
                            index = std::move(setup.index)]() mutable {
        run(std::move(handle), plan, std::move(program), threads, std::move(index));
    });
}

Task::~Task() {
    cancel();
    if (thread_.joinable()) thread_.join();
}

void Task::run(DatasetHandle handle, SamplingPlan plan, TransformProgram program, std::size_t threads,
               std::shared_ptr<const LineIndex> index) {
    auto on_merged = [&](std::size_t k, TaskState state) {
        nlohmann::json j = analyzer_->snapshot();
        j["task_id"] = id_;
        j["k"] = k;
        j["state"] = to_string(state);
        if (timing_) {
            j["elapsed_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
        }
        std::string text = analyzer_->render_text();
        auto plot = plot_of(*analyzer_);
        {
            std::lock_guard lock(mu_);
            if (state_ != TaskState::running) return false;
            emissions_.push_back(j.dump());
            last_k_ = k;
            latest_text_ = std::move(text);
            latest_plot_ = std::move(plot);
        }
        cv_.notify_all();
        if (hook_) hook_(*this, k, state, *analyzer_);
        return true;
    };
    try {
        RunOptions options{threads, &cancel_flag_, index.get()};
        const TaskState st = run_replicates(handle, plan, program, *analyzer_, on_merged, options);
        finish(st, {});
    } catch (const std::exception& e) {
        finish(TaskState::failed, e.what());
    }
}

void Task::finish(TaskState state, std::string error) {
    {
        std::lock_guard lock(mu_);
        if (state_ != TaskState::running) return;
        state_ = state;
        error_ = std::move(error);
        nlohmann::json j = {{"task_id", id_}, {"k", last_k_}, {"state", to_string(state_)}};
        if (!error_.empty()) j["error"] = error_;
        if (timing_) {
            j["elapsed_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
        }
        terminal_ = j.dump();
    }
    cv_.notify_all();
}

TaskState Task::cancel() {
    cancel_flag_.store(true, std::memory_order_release);
    finish(TaskState::cancelled, {});
    std::lock_guard lock(mu_);
    return state_;
}

TaskState Task::state() const {
    std::lock_guard lock(mu_);
    return state_;
}

std::string Task::error() const {
    std::lock_guard lock(mu_);
    return error_;
}

std::vector<std::string> Task::emissions() const {
    std::lock_guard lock(mu_);
    return emissions_;
}

std::optional<std::string> Task::terminal_event() const {
    std::lock_guard lock(mu_);
    return terminal_;
}

std::vector<std::string> Task::wait_emissions(std::size_t seen, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return emissions_.size() > seen || terminal_.has_value(); });
    if (seen >= emissions_.size()) return {};
    return {emissions_.begin() + static_cast<std::ptrdiff_t>(seen), emissions_.end()};
}

void Task::wait() const {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return terminal_.has_value(); });
}

std::string Task::latest_text() const {
    std::lock_guard lock(mu_);
    return latest_text_;
}

std::optional<nlohmann::json> Task::latest_plot() const {
    std::lock_guard lock(mu_);
    return latest_plot_;
}

// ---------------------------------------------------------------------------
// Session

Session::Session(DatasetHandle handle, SessionSettings settings)
    : handle_(std::move(handle)), settings_(std::move(settings)) {
    settings_.plan.validate();
    for (const auto& c : handle_.schema.columns()) {
        if (c.name == kIntercept) continue;
        if (c.role == Role::quantitative) qlist_.push_back(c.name);
        if (c.role == Role::dropped) drop_.push_back(c.name);
    }
}

Session::~Session() {
    cancel_all();
    std::map<std::size_t, std::shared_ptr<Task>> tasks;
    {
        std::lock_guard lock(mu_);
        tasks.swap(tasks_);
    }
}

std::shared_ptr<Task> Session::task(std::size_t id) const {
    std::lock_guard lock(mu_);
    auto it = tasks_.find(id);
    return it == tasks_.end() ? nullptr : it->second;
}

std::vector<std::shared_ptr<Task>> Session::tasks() const {
    std::lock_guard lock(mu_);
    std::vector<std::shared_ptr<Task>> out;
    for (const auto& [id, t] : tasks_) out.push_back(t);
    return out;
}

bool Session::cancel(std::size_t id) {
    auto t = task(id);
    if (!t) return false;
    t->cancel();
    return true;
}

void Session::cancel_all() {
    for (auto& t : tasks()) t->cancel();
}

DatasetHandle Session::handle() const {
    std::lock_guard lock(mu_);
    return handle_;
}

SessionSettings Session::settings() const {
    std::lock_guard lock(mu_);
    return settings_;
}

TransformProgram Session::program() const {
    std::lock_guard lock(mu_);
    return program_;
}

namespace {

nlohmann::json settings_json(const SessionSettings& s) {
    return {{"subsize", s.plan.n},
            {"niter", s.plan.k_max},
            {"seq", s.plan.sequential},
            {"seed", s.plan.master_seed},
            {"se", s.plan.se_target ? nlohmann::json(*s.plan.se_target) : nlohmann::json(nullptr)},
            {"threads", s.threads},
            {"index", s.plan.use_index},
            {"timing", s.timing}};
}

nlohmann::json schema_json(const DatasetHandle& h, const TransformProgram& program) {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : h.schema.columns()) {
        cols.push_back({{"name", c.name}, {"role", to_string(c.role)}, {"levels", c.levels}});
    }
    nlohmann::json out_cols = nlohmann::json::array();
    for (const auto& [name, role] : program.output_columns(h.schema)) {
        out_cols.push_back({{"name", name}, {"role", to_string(role)}});
    }
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : program.steps()) steps.push_back(to_text(s));
    return {{"path", h.path.string()}, {"columns", std::move(cols)}, {"output_columns", std::move(out_cols)},
            {"n_estimate", h.n_estimate}, {"shuffled", h.shuffled}, {"program", std::move(steps)}};
}

} // namespace

nlohmann::json Session::describe() const {
    std::lock_guard lock(mu_);
    nlohmann::json j = schema_json(handle_, program_);
    j["settings"] = settings_json(settings_);
    nlohmann::json tasks = nlohmann::json::array();
    for (const auto& [id, t] : tasks_) {
        tasks.push_back({{"id", id}, {"kind", t->kind()}, {"command", t->command()}, {"state", to_string(t->state())}});
    }
    j["tasks"] = std::move(tasks);
    return j;
}

std::string Session::fingerprint() const {
    std::lock_guard lock(mu_);
    nlohmann::json j = schema_json(handle_, program_);
    j["settings"] = settings_json(settings_);
    j["qlist"] = qlist_;
    j["drop"] = drop_;
    return j.dump();
}

std::shared_ptr<const LineIndex> Session::index_for(const SamplingPlan& plan) {
    if (!plan.use_index || plan.sequential) return nullptr;
    if (!index_) index_ = std::make_shared<const LineIndex>(LineIndex::open_or_build(handle_));
    return index_;
}

CommandResult Session::start(std::string kind, std::string command, std::unique_ptr<Analyzer> analyzer,
                             const Task::Hook& hook) {
    Task::Setup setup;
    setup.id = next_id_;
    setup.kind = std::move(kind);
    setup.command = std::move(command);
    setup.handle = handle_;
    setup.plan = settings_.plan;
    setup.program = program_;
    setup.analyzer = std::move(analyzer);
    setup.threads = settings_.threads;
    setup.timing = settings_.timing;
    setup.index = index_for(settings_.plan);
    setup.hook = hook;
    auto task = std::make_shared<Task>(std::move(setup));
    const std::size_t id = next_id_++;
    tasks_.emplace(id, std::move(task));
    CommandResult r;
    r.action = CommandResult::Action::task;
    r.task_id = id;
    r.message = "task " + std::to_string(id) + " started";
    return r;
}

CommandResult Session::execute(std::string_view line, const Task::Hook& hook) {
    line = trim(line);
    CommandResult result;
    if (line.empty() || line.front() == '#') return result;

    const auto [verb_view, rest] = split_word(line);
    const std::string verb(verb_view);
    std::lock_guard lock(mu_);

    const auto out_cols = program_.output_columns(handle_.schema);
    auto role_of = [&](std::string_view name) -> std::optional<Role> {
        for (const auto& [n, r] : out_cols) {
            if (n == name) return r;
        }
        return std::nullopt;
    };
    auto require = [&](const std::vector<std::string>& names) {
        for (const auto& n : names) {
            if (role_of(n)) continue;
            const ColumnSpec* cs = handle_.schema.find(n);
            if (cs != nullptr && cs->role == Role::dropped) throw UsageError("column '" + n + "' is dropped");
            throw UsageError("unknown column '" + n + "'");
        }
    };
    auto names_with = [&](Role role) {
        std::vector<std::string> v;
        for (const auto& [n, r] : out_cols) {
            if (r == role && n != kIntercept) v.push_back(n);
        }
        return v;
    };

    if (verb == "help") {
        result.message = command_help();
    } else if (verb == "quit" || verb == "exit") {
        result.action = CommandResult::Action::quit;
    } else if (verb == "schema") {
        TextTable t({"column", "role", "levels"});
        for (const auto& c : handle_.schema.columns()) {
            std::string levels;
            for (const auto& l : c.levels) levels += (levels.empty() ? "" : ",") + l;
            t.add_row({c.name, std::string(to_string(c.role)), levels});
        }
        result.message = t.render();
    } else if (verb == "size") {
        if (rest == "exact") {
            result.message = std::to_string(count_rows_exact(handle_));
        } else if (rest.empty()) {
            result.message = std::to_string(handle_.n_estimate);
        } else {
            throw UsageError("usage: size [exact]");
        }
    } else if (verb == "show") {
        result.message = settings_json(settings_).dump(2);
    } else if (verb == "program") {
        result.message = program_.empty() ? "(no transforms)" : program_.to_text();
    } else if (verb == "tasks") {
        TextTable t({"id", "kind", "state", "command"});
        for (const auto& [id, task] : tasks_) {
            t.add_row({std::to_string(id), task->kind(), std::string(to_string(task->state())), task->command()});
        }
        result.message = t.render();
    } else if (verb == "stop") {
        if (rest.empty()) {
            for (auto& [id, task] : tasks_) task->cancel();
            result.message = "stopped";
        } else {
            const auto id = parse_count(rest, "task id");
            auto it = tasks_.find(id);
            if (it == tasks_.end()) throw UsageError("unknown task " + std::string(rest));
            result.message = "task " + std::to_string(id) + ": " + std::string(to_string(it->second->cancel()));
        }
    } else if (verb == "reset") {
        program_ = TransformProgram();
        result.message = "transforms cleared";
    } else if (verb == "set") {
        const auto w = words(rest);
        if (w.size() != 2) throw UsageError("usage: set <subsize|niter|seq|seed|se|threads|index|timing> <value>");
        SessionSettings s = settings_;
        const auto& key = w[0];
        const auto& val = w[1];
        if (key == "subsize" || key == "n") s.plan.n = parse_count(val, key);
        else if (key == "niter" || key == "k") s.plan.k_max = parse_count(val, key);
        else if (key == "seq") s.plan.sequential = parse_switch(val, key);
        else if (key == "seed") s.plan.master_seed = parse_count(val, key);
        else if (key == "se") {
            if (val == "off") s.plan.se_target.reset();
            else if (auto v = csv::parse_number(val)) s.plan.se_target = *v;
            else throw UsageError("se must be a number or off");
        } else if (key == "threads") {
            s.threads = parse_count(val, key);
            if (s.threads == 0) throw UsageError("threads must be at least 1");
        } else if (key == "index") s.plan.use_index = parse_switch(val, key);
        else if (key == "timing") s.timing = parse_switch(val, key);
        else throw UsageError("unknown setting '" + key + "'");
        s.plan.validate();
        settings_ = s;
        result.message = key + " = " + val;
    } else if (verb == "qlist" || verb == "drop") {
        auto names = split_names(rest);
        std::vector<std::string> q = verb == "qlist" ? names : qlist_;
        std::vector<std::string> d = verb == "drop" ? names : drop_;
        std::erase(q, std::string(kIntercept));
        auto& other = verb == "qlist" ? d : q;
        std::erase_if(other, [&](const std::string& n) { return std::find(names.begin(), names.end(), n) != names.end(); });
        DatasetHandle h = update_schema(handle_, q, d);
        (void)program_.output_columns(h.schema); // the program must still apply
        handle_ = std::move(h);
        qlist_ = std::move(q);
        drop_ = std::move(d);
        result.message = verb + " updated";
    } else if (verb == "app" || verb == "bin" || verb == "ady") {
        TransformProgram trial = program_;
        trial.add(TransformProgram::parse_step(line));
        (void)trial.output_columns(handle_.schema);
        program_ = std::move(trial);
        result.message = "ok";
    } else if (verb == "stats") {
        auto cols = split_names(rest);
        require(cols);
        if (cols.empty()) cols = default_stats_columns(handle_, program_);
        return start("stats", std::string(line), std::make_unique<StatsAnalyzer>(cols), hook);
    } else if (verb == "table") {
        auto cols = split_names(rest);
        require(cols);
        if (cols.empty()) cols = names_with(Role::qualitative);
        return start("table", std::string(line), std::make_unique<TableAnalyzer>(cols, true), hook);
    } else if (verb == "corr") {
        auto cols = split_names(rest);
        require(cols);
        if (cols.empty()) cols = names_with(Role::quantitative);
        return start("corr", std::string(line), std::make_unique<CorrAnalyzer>(cols), hook);
    } else if (verb == "ols" || verb == "logit") {
        ModelSpec spec;
        spec.kind = verb == "ols" ? ModelKind::ols : ModelKind::logit;
        const auto tilde = rest.find('~');
        const auto lhs = split_names(rest.substr(0, tilde));
        if (lhs.size() != 1) throw UsageError("usage: " + verb + " <y> [~ <x1,x2,..>]");
        spec.y = lhs.front();
        if (tilde != std::string_view::npos) {
            spec.x = split_names(rest.substr(tilde + 1));
            if (spec.x.empty()) throw UsageError("no regressors after '~'");
        }
        auto analyzer = std::make_unique<ModelAnalyzer>(spec.kind, resolve_design(handle_.schema, program_, spec),
                                                        settings_.plan.k_max);
        return start(verb, std::string(line), std::move(analyzer), hook);
    } else if (verb == "plot" || verb == "bar" || verb == "hist" || verb == "box" || verb == "gbox") {
        auto w = words(rest);
        if (verb != "plot" && verb != "bar") w.insert(w.begin(), verb);
        if (w.empty()) throw UsageError("usage: plot <hist|mu|std|size|box|gbox|corr> <columns>");
        PlotRequest req;
        req.kind = plot_kind_from_string(w[0]);
        if (verb == "bar" && req.kind != PlotKind::mu && req.kind != PlotKind::std && req.kind != PlotKind::size) {
            throw UsageError("usage: bar <mu|std|size> ...");
        }
        if (req.kind == PlotKind::tstat_bars) throw UsageError("tstat bars come from an ols or logit task");
        std::vector<std::string> cols(w.begin() + 1, w.end());
        if (req.kind == PlotKind::corr) {
            cols = split_names(rest.substr(rest.find("corr") + 4));
            if (cols.empty()) cols = names_with(Role::quantitative);
        } else if ((req.kind == PlotKind::hist || req.kind == PlotKind::gbox) && !cols.empty() &&
                   csv::parse_number(cols.back()) && !role_of(cols.back())) {
            const auto count = parse_count(cols.back(), req.kind == PlotKind::hist ? "bins" : "groups");
            if (count == 0) throw UsageError("count must be positive");
            (req.kind == PlotKind::hist ? req.bins : req.groups) = count;
            cols.pop_back();
        }
        require(cols);
        req.columns = cols;
        // Reject bad arity now rather than on the first replicate.
        const std::size_t n = cols.size();
        const bool arity_ok = (req.kind == PlotKind::hist && n == 1) ||
                              ((req.kind == PlotKind::mu || req.kind == PlotKind::std) && n == 2) ||
                              (req.kind == PlotKind::size && (n == 1 || n == 2)) ||
                              (req.kind == PlotKind::box && (n == 1 || n == 2)) ||
                              (req.kind == PlotKind::gbox && n == 2) || (req.kind == PlotKind::corr && n >= 2);
        if (!arity_ok) throw UsageError("wrong number of columns for plot " + std::string(to_string(req.kind)));
        return start("plot", std::string(line), std::make_unique<PlotAnalyzer>(std::move(req)), hook);
    } else {
        throw UsageError("unknown command '" + verb + "' (try help)");
    }
    return result;
}

} // namespace pondstat
