#pragma once

#include "pondstat/session.hpp"

#include <memory>
#include <string>

namespace pondstat {

/// HTTP front end over sessions. Routes:
///   POST   /sessions                          {path, codebook?, seed?, subsize?, niter?, seq?, threads?}
///   GET    /sessions/{id}/schema
///   POST   /sessions/{id}/commands            {command} (REPL grammar)
///   GET    /sessions/{id}/tasks/{tid}         task summary and latest snapshot
///   GET    /sessions/{id}/tasks/{tid}/stream  text/event-stream, one `data:` line per
///                                             emission, then `event: end`
///   POST   /sessions/{id}/tasks/{tid}/cancel
///   GET    /sessions/{id}/plots/{tid}/latest  PlotSpec JSON
///   DELETE /sessions/{id}
/// Errors are JSON {"error": message} with 400 (bad command), 404 (unknown
/// id) or 409 (dataset unreadable).
class Service {
public:
    explicit Service(SessionSettings defaults = {}, std::string cors_origin = "*");
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds; port 0 picks a free port. Returns the bound port or -1.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind.
    bool serve();
    void stop();

    [[nodiscard]] std::size_t session_count() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace pondstat
