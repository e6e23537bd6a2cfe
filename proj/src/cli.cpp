#include "pondstat/cli.hpp"

#include "pondstat/error.hpp"
#include "pondstat/plotdata.hpp"
#include "pondstat/random.hpp"
#include "pondstat/service.hpp"
#include "pondstat/session.hpp"
#include "pondstat/shuffle.hpp"
#include "pondstat/source.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unistd.h>

namespace pondstat {

namespace {

std::atomic<bool> g_interrupted{false};
Service* g_service = nullptr;

extern "C" void on_sigint(int) {
    g_interrupted.store(true);
    if (g_service != nullptr) g_service->stop();
}

struct Common {
    std::string data;
    std::string codebook;
    std::size_t subsize = 100000;
    std::size_t niter = 10;
    bool seq = false;
    std::optional<std::uint64_t> seed;
    std::optional<double> se;
    std::size_t threads = 1;
    std::string program;
    std::vector<std::string> steps;
    std::vector<std::string> qlist;
    std::vector<std::string> drop;
    bool json = false;
    bool live = false;
    bool timing = false;
    bool index = false;
    std::string outdir;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("data", c.data, "CSV file")->required();
    sub->add_option("--codebook", c.codebook, "codebook JSON (qlist, drop, scale_level)");
    sub->add_option("--subsize,-n", c.subsize, "rows per replicate")->capture_default_str();
    sub->add_option("--niter,-k", c.niter, "number of replicates")->capture_default_str();
    sub->add_flag("--seq", c.seq, "read consecutive rows (for shuffled files)");
    sub->add_option("--seed", c.seed, "master seed (default: from the clock, echoed on stderr)");
    sub->add_option("--se", c.se, "stop once every SE (x100) is below this");
    sub->add_option("--threads", c.threads, "worker threads")->capture_default_str();
    sub->add_option("--program", c.program, "transform program file");
    sub->add_option("--step", c.steps, "transform step, e.g. \"app x log(x)\" (repeatable)");
    sub->add_option("--qlist", c.qlist, "quantitative columns")->delimiter(',');
    sub->add_option("--drop", c.drop, "columns to ignore")->delimiter(',');
    sub->add_flag("--json", c.json, "print each emission as a JSON line");
    sub->add_flag("--live", c.live, "print the table after every replicate");
    sub->add_flag("--timing", c.timing, "report elapsed time");
    sub->add_flag("--index", c.index, "sample rows through a line index (exactly uniform)");
    sub->add_option("--outdir", c.outdir, "directory for SVG plots (default: $PONDSTAT_OUTDIR or .)");
}

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
    return s;
}

std::uint64_t clock_seed() {
    const auto t = std::chrono::system_clock::now().time_since_epoch().count();
    return splitmix64(static_cast<std::uint64_t>(t)) % 1000000000ULL;
}

std::filesystem::path outdir_of(const Common& c) {
    if (!c.outdir.empty()) return c.outdir;
    if (const char* env = std::getenv("PONDSTAT_OUTDIR"); env != nullptr && *env != '\0') return env;
    return ".";
}

std::unique_ptr<Session> open_session(const Common& c, std::ostream& err) {
    std::optional<Codebook> codebook;
    if (!c.codebook.empty()) codebook = Codebook::load(c.codebook);
    SessionSettings s;
    s.plan.n = c.subsize;
    s.plan.k_max = c.niter;
    s.plan.sequential = c.seq;
    s.plan.se_target = c.se;
    s.plan.use_index = c.index;
    s.plan.master_seed = c.seed ? *c.seed : clock_seed();
    s.threads = std::max<std::size_t>(1, c.threads);
    s.timing = c.timing;
    err << "seed: " << s.plan.master_seed << '\n';

    OpenOptions opts;
    opts.seed = s.plan.master_seed;
    auto handle = open_dataset(c.data, codebook ? SourceType::with_codebook : SourceType::no_codebook, codebook, opts);
    auto session = std::make_unique<Session>(std::move(handle), s);
    if (!c.qlist.empty()) session->execute("qlist " + join(c.qlist));
    if (!c.drop.empty()) session->execute("drop " + join(c.drop));
    if (!c.program.empty()) {
        std::ifstream f(c.program);
        if (!f) throw DataError("cannot read program file '" + c.program + "'");
        std::stringstream ss;
        ss << f.rdbuf();
        for (const auto& step : TransformProgram::parse(ss.str()).steps()) session->execute(to_text(step));
    }
    for (const auto& step : c.steps) session->execute(step);
    return session;
}

// Runs one command to completion and prints it. Returns the exit code.
int run_task(Session& session, const std::string& command, const Common& c, bool write_svg, std::ostream& out,
             std::ostream& err) {
    const auto dir = outdir_of(c);
    std::mutex print_mu;
    std::filesystem::path last_svg;
    Task::Hook hook = [&](const Task& task, std::size_t k, TaskState state, const Analyzer& analyzer) {
        if (write_svg) {
            std::optional<PlotSpec> spec;
            if (const auto* p = dynamic_cast<const PlotAnalyzer*>(&analyzer)) spec = p->latest();
            if (const auto* m = dynamic_cast<const ModelAnalyzer*>(&analyzer)) spec = build_tstat_bars(m->table(true));
            if (spec) {
                spec->replicate = k;
                std::filesystem::create_directories(dir);
                const auto path = dir / (std::string(to_string(spec->kind)) + "-" + std::to_string(task.id()) + "_" +
                                         std::to_string(k) + ".svg");
                std::ofstream f(path, std::ios::binary);
                f << render_svg(*spec);
                if (!f) throw DataError("cannot write " + path.string());
                std::lock_guard lock(print_mu);
                last_svg = path;
            }
        }
        std::lock_guard lock(print_mu);
        if (c.json) {
            out << task.emissions().back() << '\n';
        } else if (c.live) {
            out << "-- k = " << k << " (" << to_string(state) << ")\n" << task.latest_text() << '\n';
        }
        out.flush();
    };

    const auto result = session.execute(command, hook);
    if (!result.task_id) {
        out << result.message << '\n';
        return 0;
    }
    auto task = session.task(*result.task_id);
    while (!task->terminal_event()) {
        task->wait_emissions(task->emissions().size(), std::chrono::milliseconds(100));
        if (g_interrupted.exchange(false)) task->cancel();
    }
    if (c.json) {
        out << *task->terminal_event() << '\n';
    } else if (!c.live) {
        out << task->latest_text();
    }
    if (task->state() == TaskState::failed) {
        err << "error: " << task->error() << '\n';
        return 2;
    }
    if (!c.json) {
        if (!last_svg.empty()) out << "svg: " << last_svg.string() << '\n';
        const auto emissions = task->emissions();
        out << "[" << to_string(task->state()) << " after " << emissions.size() << " replicate(s)]\n";
    }
    if (c.timing) {
        const auto end = nlohmann::json::parse(*task->terminal_event());
        err << "elapsed: " << end.value("elapsed_s", 0.0) << " s\n";
    }
    return 0;
}

int run_repl(Session& session, const Common& c, std::istream& in, std::ostream& out, std::ostream& err) {
    const bool interactive = &in == &std::cin && ::isatty(STDIN_FILENO) != 0;
    std::string line;
    while (true) {
        if (interactive) out << "pondstat> " << std::flush;
        if (!std::getline(in, line)) break;
        if (!interactive && !line.empty()) out << "> " << line << '\n';
        try {
            std::istringstream words(line);
            std::string verb;
            words >> verb;
            if (verb == "quit" || verb == "exit") return 0;
            const bool plots = verb == "plot" || verb == "bar" || verb == "hist" || verb == "box" || verb == "gbox";
            const int code = run_task(session, line, c, plots, out, err);
            if (code != 0) err << "(task failed; session kept)\n";
        } catch (const UsageError& e) {
            out << "error: " << e.what() << '\n';
        } catch (const std::exception& e) {
            out << "error: " << e.what() << '\n';
        }
    }
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"pondstat: subsample statistics for CSV files larger than memory"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    // shuffle
    std::string sh_in, sh_out;
    std::uint64_t sh_mem = 256ULL << 20, sh_seed = 0;
    bool sh_seed_set = false;
    auto* shuffle = app.add_subcommand("shuffle", "write a uniformly shuffled copy of a CSV file");
    shuffle->add_option("input", sh_in, "CSV file to shuffle")->required();
    shuffle->add_option("output", sh_out, "destination file")->required();
    shuffle->add_option("--mem", sh_mem, "memory budget in bytes")->capture_default_str();
    shuffle->add_option("--seed", sh_seed, "permutation seed (default: from the clock, echoed on stderr)")->each([&](const std::string&) { sh_seed_set = true; });

    // size
    std::string sz_data;
    bool sz_exact = false;
    std::size_t sz_probes = 1000;
    auto* size = app.add_subcommand("size", "estimate the number of data rows");
    size->add_option("data", sz_data, "CSV file")->required();
    size->add_flag("--exact", sz_exact, "count every line");
    size->add_option("--probes", sz_probes, "random lines to measure")->capture_default_str();

    std::map<std::string, Common> common;
    std::vector<std::string> cols;
    std::string y, x, group, stat = "mu";
    std::size_t bins = kDefaultBins, groups = kDefaultGroups;
    bool model_plot = false;

    auto sub = [&](const char* name, const char* about) {
        auto* s = app.add_subcommand(name, about);
        add_common(s, common[name]);
        return s;
    };
    auto* stats = sub("stats", "summary statistics");
    stats->add_option("--col,-c", cols, "columns (default: quantitative)")->delimiter(',');
    auto* table = sub("table", "frequency tables");
    table->add_option("--col,-c", cols, "columns (default: qualitative)")->delimiter(',');
    auto* corr = sub("corr", "correlation matrix");
    corr->add_option("--col,-c", cols, "columns (default: quantitative)")->delimiter(',');
    auto* hist = sub("hist", "histogram (SVG per replicate)");
    hist->add_option("--col,-c", y, "column")->required();
    hist->add_option("--bins", bins, "number of bins")->capture_default_str();
    auto* box = sub("box", "boxplot (SVG per replicate)");
    box->add_option("--y", y, "measured column")->required();
    box->add_option("--x,--group", group, "grouping column");
    auto* gbox = sub("gbox", "boxplots of y over equal-count slices of x");
    gbox->add_option("--y", y, "measured column")->required();
    gbox->add_option("--x", x, "slicing column")->required();
    gbox->add_option("--groups", groups, "number of slices")->capture_default_str();
    auto* bar = sub("bar", "bar chart of a group statistic");
    bar->add_option("--stat", stat, "mu, std or size")->check(CLI::IsMember({"mu", "std", "size"}));
    bar->add_option("--y", y, "measured column (not needed for size)");
    bar->add_option("--group,-g", group, "grouping column")->required();
    auto* ols = sub("ols", "linear regression");
    auto* logit = sub("logit", "logistic regression");
    for (auto* m : {ols, logit}) {
        m->add_option("--y", y, "response column")->required();
        m->add_option("--x", cols, "regressors (default: all quantitative)")->delimiter(',');
        m->add_flag("--plot", model_plot, "write tStat bar charts");
    }
    sub("repl", "interactive session (commands on stdin)");

    std::string host = "127.0.0.1";
    int port = 8080;
    std::string cors = "*";
    auto* serve = app.add_subcommand("serve", "HTTP session service");
    serve->add_option("--host", host, "interface to bind")->capture_default_str();
    serve->add_option("--port", port, "TCP port (0 picks a free one)")->capture_default_str();
    serve->add_option("--cors-origin", cors, "Access-Control-Allow-Origin value")->capture_default_str();

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    if (!argv_rev.empty()) argv_rev.pop_back(); // program name
    try {
        app.parse(argv_rev);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, er;
        app.exit(e, o, er);
        err << er.str() << o.str();
        return 1;
    }

    try {
        if (shuffle->parsed()) {
            if (!sh_seed_set) sh_seed = clock_seed();
            err << "seed: " << sh_seed << '\n';
            const auto r = shuffle_file(sh_in, sh_out, sh_mem, sh_seed);
            out << "rows: " << r.output_rows << "\nbuckets: " << r.buckets << "\npeak memory: " << r.bytes_peak_memory
                << " bytes\n";
            return 0;
        }
        if (size->parsed()) {
            OpenOptions opts;
            opts.probes = sz_probes;
            opts.exact_count = sz_exact;
            const auto h = open_dataset(sz_data, SourceType::no_codebook, std::nullopt, opts);
            out << h.n_estimate << '\n';
            return 0;
        }
        if (serve->parsed()) {
            Service svc;
            const int bound = svc.bind(host, port);
            if (bound < 0) throw DataError("cannot bind " + host + ":" + std::to_string(port));
            g_service = &svc;
            std::signal(SIGINT, on_sigint);
            out << "listening on http://" << host << ":" << bound << std::endl;
            svc.serve();
            g_service = nullptr;
            return 0;
        }

        std::signal(SIGINT, on_sigint);
        for (auto& [name, c] : common) {
            CLI::App* s = app.get_subcommand(name);
            if (!s->parsed()) continue;
            auto session = open_session(c, err);
            if (name == "repl") return run_repl(*session, c, in, out, err);

            std::string command;
            bool plot = false;
            if (name == "stats" || name == "table" || name == "corr") {
                command = name + " " + join(cols);
            } else if (name == "hist") {
                command = "plot hist " + y + " " + std::to_string(bins);
                plot = true;
            } else if (name == "box") {
                command = "plot box " + y + " " + group;
                plot = true;
            } else if (name == "gbox") {
                command = "plot gbox " + y + " " + x + " " + std::to_string(groups);
                plot = true;
            } else if (name == "bar") {
                command = "plot " + stat + " " + y + " " + group;
                plot = true;
            } else if (name == "ols" || name == "logit") {
                command = name + " " + y + (cols.empty() ? "" : " ~ " + join(cols));
                plot = model_plot;
            }
            return run_task(*session, command, c, plot, out, err);
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const ModelError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return run_cli(args, std::cin, std::cout, std::cerr);
}

} // namespace pondstat
