#include "pondstat/service.hpp"

#include "pondstat/error.hpp"
#include "pondstat/schemas.hpp"
#include "pondstat/source.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <map>
#include <mutex>

namespace pondstat {

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view message) {
    send_json(res, status, {{"error", message}});
}

std::optional<std::size_t> parse_id(const std::string& text) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size()) return std::nullopt;
    return v;
}

} // namespace

struct Service::Impl {
    SessionSettings defaults;
    std::string cors_origin;
    httplib::Server server;
    mutable std::mutex mu;
    std::size_t next_id = 1;
    std::map<std::size_t, std::shared_ptr<Session>> sessions;

    std::shared_ptr<Session> find(const httplib::Request& req, httplib::Response& res) {
        const auto id = parse_id(req.path_params.at("id"));
        std::lock_guard lock(mu);
        auto it = id ? sessions.find(*id) : sessions.end();
        if (it == sessions.end()) {
            send_error(res, 404, "unknown session '" + req.path_params.at("id") + "'");
            return nullptr;
        }
        return it->second;
    }

    std::shared_ptr<Task> find_task(const Session& s, const httplib::Request& req, httplib::Response& res) {
        const auto id = parse_id(req.path_params.at("tid"));
        auto task = id ? s.task(*id) : nullptr;
        if (!task) send_error(res, 404, "unknown task '" + req.path_params.at("tid") + "'");
        return task;
    }

    // Maps engine exceptions to status codes.
    template <class F>
    void guarded(httplib::Response& res, F&& f) {
        try {
            f();
        } catch (const UsageError& e) {
            send_error(res, 400, e.what());
        } catch (const DataError& e) {
            send_error(res, 409, e.what());
        } catch (const nlohmann::json::exception& e) {
            send_error(res, 400, std::string("malformed JSON: ") + e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, e.what());
        }
    }

    void create_session(const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto body = nlohmann::json::parse(req.body);
            if (!body.is_object() || !body.contains("path") || !body["path"].is_string()) {
                throw UsageError("body must be an object with a string 'path'");
            }
            std::optional<Codebook> codebook;
            if (body.contains("codebook") && !body["codebook"].is_null()) {
                const auto& cb = body["codebook"];
                codebook = cb.is_string() ? Codebook::load(cb.get<std::string>()) : Codebook::parse_json(cb.dump());
            }
            SessionSettings settings = defaults;
            if (body.contains("seed")) settings.plan.master_seed = body["seed"].get<std::uint64_t>();
            if (body.contains("subsize")) settings.plan.n = body["subsize"].get<std::size_t>();
            if (body.contains("niter")) settings.plan.k_max = body["niter"].get<std::size_t>();
            if (body.contains("seq")) settings.plan.sequential = body["seq"].get<bool>();
            if (body.contains("threads")) settings.threads = std::max<std::size_t>(1, body["threads"].get<std::size_t>());
            if (body.contains("timing")) settings.timing = body["timing"].get<bool>();
            OpenOptions opts;
            opts.seed = settings.plan.master_seed;
            auto handle = open_dataset(body["path"].get<std::string>(),
                                       codebook ? SourceType::with_codebook : SourceType::no_codebook, codebook, opts);
            auto session = std::make_shared<Session>(std::move(handle), settings);
            std::size_t id = 0;
            {
                std::lock_guard lock(mu);
                id = next_id++;
                sessions.emplace(id, session);
            }
            send_json(res, 201, {{"session_id", std::to_string(id)}, {"schema", session->describe()}});
        });
    }

    void command(const httplib::Request& req, httplib::Response& res) {
        auto s = find(req, res);
        if (!s) return;
        guarded(res, [&] {
            std::string text = req.body;
            const auto ct = req.get_header_value("Content-Type");
            if (ct.find("json") != std::string::npos || (!text.empty() && text.front() == '{')) {
                const auto body = nlohmann::json::parse(text);
                if (!body.contains("command") || !body["command"].is_string()) {
                    throw UsageError("body must be an object with a string 'command'");
                }
                text = body["command"].get<std::string>();
            }
            const auto r = s->execute(text);
            nlohmann::json out = {{"message", r.message}};
            if (r.task_id) out["task_id"] = *r.task_id;
            if (r.action == CommandResult::Action::quit) out["message"] = "quit has no effect on a service session";
            send_json(res, r.task_id ? 202 : 200, out);
        });
    }

    void task_summary(const httplib::Request& req, httplib::Response& res) {
        auto s = find(req, res);
        if (!s) return;
        auto t = find_task(*s, req, res);
        if (!t) return;
        const auto emissions = t->emissions();
        nlohmann::json out = {{"task_id", t->id()},
                              {"kind", t->kind()},
                              {"command", t->command()},
                              {"state", to_string(t->state())},
                              {"emissions", emissions.size()},
                              {"latest", emissions.empty() ? nlohmann::json(nullptr) : nlohmann::json::parse(emissions.back())}};
        if (const auto err = t->error(); !err.empty()) out["error"] = err;
        send_json(res, 200, out);
    }

    void stream(const httplib::Request& req, httplib::Response& res) {
        auto s = find(req, res);
        if (!s) return;
        auto t = find_task(*s, req, res);
        if (!t) return;
        std::size_t from = 0;
        if (req.has_param("from")) from = parse_id(req.get_param_value("from")).value_or(0);
        auto seen = std::make_shared<std::size_t>(from);
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider("text/event-stream", [t, seen](std::size_t, httplib::DataSink& sink) {
            const auto batch = t->wait_emissions(*seen, std::chrono::milliseconds(500));
            for (const auto& e : batch) {
                const std::string chunk = "id: " + std::to_string(*seen + 1) + "\ndata: " + e + "\n\n";
                if (!sink.write(chunk.data(), chunk.size())) return false;
                ++*seen;
            }
            if (batch.empty()) {
                if (auto end = t->terminal_event(); end && *seen >= t->emissions().size()) {
                    const std::string chunk = "event: end\ndata: " + *end + "\n\n";
                    sink.write(chunk.data(), chunk.size());
                    sink.done();
                } else if (!sink.is_writable()) {
                    return false;
                }
            }
            return true;
        });
    }

    void cancel(const httplib::Request& req, httplib::Response& res) {
        auto s = find(req, res);
        if (!s) return;
        auto t = find_task(*s, req, res);
        if (!t) return;
        send_json(res, 200, {{"task_id", t->id()}, {"state", to_string(t->cancel())}});
    }

    void latest_plot(const httplib::Request& req, httplib::Response& res) {
        auto s = find(req, res);
        if (!s) return;
        auto t = find_task(*s, req, res);
        if (!t) return;
        if (auto plot = t->latest_plot()) {
            (*plot)["task_id"] = t->id();
            (*plot)["state"] = to_string(t->state());
            send_json(res, 200, *plot);
        } else {
            send_error(res, 404, "task " + std::to_string(t->id()) + " has no plot yet");
        }
    }

    void remove(const httplib::Request& req, httplib::Response& res) {
        auto s = find(req, res);
        if (!s) return;
        s->cancel_all();
        {
            std::lock_guard lock(mu);
            sessions.erase(*parse_id(req.path_params.at("id")));
        }
        send_json(res, 200, {{"deleted", req.path_params.at("id")}});
    }

    void routes() {
        server.set_default_headers({{"Access-Control-Allow-Origin", cors_origin},
                                    {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"},
                                    {"Access-Control-Allow-Headers", "Content-Type"}});
        server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
        server.Get("/health", [](const httplib::Request&, httplib::Response& res) { send_json(res, 200, {{"ok", true}}); });
        server.Get("/schemas", [](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, {{"schemas", schema_names()}});
        });
        server.Get("/schemas/:name", [](const auto& req, auto& res) {
            const auto& name = req.path_params.at("name");
            const auto names = schema_names();
            if (std::find(names.begin(), names.end(), name) == names.end()) {
                send_error(res, 404, "unknown schema '" + name + "'");
            } else {
                send_json(res, 200, json_schema(name));
            }
        });
        server.Post("/sessions", [this](const auto& req, auto& res) { create_session(req, res); });
        server.Get("/sessions/:id/schema", [this](const auto& req, auto& res) {
            if (auto s = find(req, res)) send_json(res, 200, s->describe());
        });
        server.Post("/sessions/:id/commands", [this](const auto& req, auto& res) { command(req, res); });
        server.Get("/sessions/:id/tasks/:tid", [this](const auto& req, auto& res) { task_summary(req, res); });
        server.Get("/sessions/:id/tasks/:tid/stream", [this](const auto& req, auto& res) { stream(req, res); });
        server.Post("/sessions/:id/tasks/:tid/cancel", [this](const auto& req, auto& res) { cancel(req, res); });
        server.Get("/sessions/:id/plots/:tid/latest", [this](const auto& req, auto& res) { latest_plot(req, res); });
        server.Delete("/sessions/:id", [this](const auto& req, auto& res) { remove(req, res); });
    }
};

Service::Service(SessionSettings defaults, std::string cors_origin) : impl_(std::make_unique<Impl>()) {
    impl_->defaults = std::move(defaults);
    impl_->cors_origin = std::move(cors_origin);
    impl_->routes();
}

Service::~Service() {
    stop();
    std::map<std::size_t, std::shared_ptr<Session>> sessions;
    {
        std::lock_guard lock(impl_->mu);
        sessions.swap(impl_->sessions);
    }
}

int Service::bind(const std::string& host, int port) {
    if (port == 0) return impl_->server.bind_to_any_port(host);
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool Service::serve() { return impl_->server.listen_after_bind(); }

void Service::stop() {
    if (impl_->server.is_running()) impl_->server.stop();
}

std::size_t Service::session_count() const {
    std::lock_guard lock(impl_->mu);
    return impl_->sessions.size();
}

} // namespace pondstat
