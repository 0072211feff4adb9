#pragma once

#include <memory>
#include <string>

#include "advqa/authoring.hpp"

namespace advqa {

/// JSON-over-HTTP front end for AuthoringService.
///
///   POST /api/sessions                   {author_id, model_id, answer}
///   POST /api/sessions/{id}/draft        {text, granularity?}
///   POST /api/sessions/{id}/submit
///   POST /api/sessions/{id}/abandon
///   GET  /api/sessions/{id}
///   GET  /api/sessions/{id}/trajectory
///   GET  /api/models
///   GET  /api/answers?prefix=&model=&limit=
///
/// Failures answer 4xx/5xx with {"error_code", "message"}.
class HttpServer {
public:
    explicit HttpServer(AuthoringService& service);
    ~HttpServer();

    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds the listening socket; port 0 picks a free port. Returns the
    /// bound port. Throws Error("bind_failed") if the port is taken.
    int bind(const std::string& host, int port);

    /// Serves until stop(). Requires a successful bind().
    void run();

    void stop();

    /// Blocks until the server accepts connections.
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Status code for a library error code.
int http_status_for(const std::string& error_code);

} // namespace advqa
