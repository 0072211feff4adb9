#include "advqa/http_api.hpp"

#include <httplib.h>
#include <json.hpp>

#include "advqa/error.hpp"

namespace advqa {
namespace {

using nlohmann::json;

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string_view family_name(ModelFamily f) {
    switch (f) {
    case ModelFamily::Retrieval: return "ir";
    case ModelFamily::Neural: return "neural";
    case ModelFamily::Other: return "other";
    }
    return "other";
}

json draft_body(const EditEvent& ev) {
    const auto& f = ev.feedback;
    json guesses = json::array();
    for (const auto& g : f.guesses) {
        guesses.push_back({{"answer", g.answer.canonical_name}, {"score", g.score}});
    }
    return {{"seq", ev.seq},
            {"guesses", std::move(guesses)},
            {"buzz",
             {{"first", optional_number(f.buzz.first_correct_fraction)},
              {"stable", optional_number(f.buzz.stable_correct_fraction)},
              {"granularity", std::string(to_string(f.granularity))}}},
            {"evidence", {{"tokens", f.tokens}, {"weights", f.evidence.weights}}},
            {"top1_correct", f.top1_correct}};
}

json verdict_body(const ValidationVerdict& v) {
    json j = {{"verdict", v.accepted() ? "Accept" : "Reject"}};
    if (v.reason) {
        j["reason"] = std::string(to_string(*v.reason));
    }
    if (!v.matched_id.empty()) {
        j["matched_id"] = v.matched_id;
    }
    return j;
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, const std::string& code, const std::string& message) {
    send_json(res, http_status_for(code), {{"error_code", code}, {"message", message}});
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) {
        return json::object();
    }
    json body;
    try {
        body = json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw Error("bad_request", std::string("request body is not valid JSON: ") + e.what());
    }
    if (!body.is_object()) {
        throw Error("bad_request", "request body must be a JSON object");
    }
    return body;
}

std::string string_field(const json& body, const char* key) {
    auto it = body.find(key);
    if (it == body.end() || !it->is_string()) {
        throw Error("bad_request", std::string("missing string field \"") + key + "\"");
    }
    return it->get<std::string>();
}

// Wraps a handler so library errors become structured error responses.
template <typename F>
httplib::Server::Handler guarded(F&& f) {
    return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const Error& e) {
            send_error(res, e.code(), e.what());
        } catch (const std::exception& e) {
            send_error(res, "internal", e.what());
        }
    };
}

} // namespace

int http_status_for(const std::string& code) {
    if (code == "bad_request") return 400;
    if (code == "unknown_session" || code == "not_found") return 404;
    if (code == "session_closed" || code == "no_events") return 409;
    if (code == "unknown_model" || code == "unknown_answer" || code == "empty_draft") return 422;
    return 500;
}

struct HttpServer::Impl {
    AuthoringService& service;
    httplib::Server server;
    bool bound = false;

    explicit Impl(AuthoringService& s) : service(s) {
        // httplib's default adds SO_REUSEPORT, which lets a second server
        // share a busy port silently; reuse only TIME_WAIT addresses.
        server.set_socket_options([](socket_t sock) {
            int yes = 1;
            setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
        });
        server.Post("/api/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const auto body = parse_body(req);
                        Category category = Category::Other;
                        if (auto it = body.find("category"); it != body.end() && it->is_string()) {
                            category = parse_category(it->get<std::string>()).value_or(Category::Other);
                        }
                        const auto session = service.create_session(string_field(body, "author_id"),
                                                                    string_field(body, "model_id"),
                                                                    string_field(body, "answer"), category);
                        send_json(res, 201, {{"session_id", session.session_id}});
                    }));
        server.Post(R"(/api/sessions/([^/]+)/draft)",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const auto body = parse_body(req);
                        std::optional<Granularity> g;
                        if (auto it = body.find("granularity"); it != body.end() && it->is_string()) {
                            g = parse_granularity(it->get<std::string>());
                            if (!g) {
                                throw Error("bad_request", "granularity must be \"word\" or \"sentence\"");
                            }
                        }
                        if (req.has_param("granularity")) {
                            g = parse_granularity(req.get_param_value("granularity"));
                            if (!g) {
                                throw Error("bad_request", "granularity must be \"word\" or \"sentence\"");
                            }
                        }
                        const auto ev = service.evaluate_draft(req.matches[1], string_field(body, "text"), g);
                        send_json(res, 200, draft_body(ev));
                    }));
        server.Post(R"(/api/sessions/([^/]+)/submit)",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        send_json(res, 200, verdict_body(service.submit(req.matches[1])));
                    }));
        server.Post(R"(/api/sessions/([^/]+)/abandon)",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        service.abandon(req.matches[1]);
                        send_json(res, 200, {{"state", "Abandoned"}});
                    }));
        server.Get(R"(/api/sessions/([^/]+)/trajectory)",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       json points = json::array();
                       for (const auto& p : service.trajectory(req.matches[1])) {
                           points.push_back(
                               {{"seq", p.seq}, {"len", p.length}, {"first", optional_number(p.first_correct_fraction)}});
                       }
                       send_json(res, 200, {{"points", std::move(points)}});
                   }));
        server.Get(R"(/api/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       const auto s = service.session(req.matches[1]);
                       json body = {{"session_id", s.session_id},
                                    {"author_id", s.author_id},
                                    {"model_id", s.target_model},
                                    {"answer", s.chosen_answer.canonical_name},
                                    {"state", std::string(to_string(s.state))},
                                    {"events", s.events.size()}};
                       if (s.last_verdict) {
                           body["last_verdict"] = verdict_body(*s.last_verdict);
                       }
                       send_json(res, 200, body);
                   }));
        server.Get("/api/models", guarded([this](const httplib::Request&, httplib::Response& res) {
                       json models = json::array();
                       for (const auto& m : service.models()) {
                           models.push_back({{"id", m.id},
                                             {"family", std::string(family_name(m.family))},
                                             {"num_answers", m.num_answers}});
                       }
                       send_json(res, 200, {{"models", std::move(models)}});
                   }));
        server.Get("/api/answers", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       std::size_t limit = 50;
                       if (req.has_param("limit")) {
                           try {
                               limit = std::stoul(req.get_param_value("limit"));
                           } catch (const std::exception&) {
                               throw Error("bad_request", "limit must be a non-negative integer");
                           }
                       }
                       const auto model = req.has_param("model") ? req.get_param_value("model") : std::string{};
                       json answers = json::array();
                       for (const auto& l : service.answers(req.get_param_value("prefix"), model, limit)) {
                           answers.push_back({{"name", l.canonical_name}, {"class_index", l.class_index}});
                       }
                       send_json(res, 200, {{"answers", std::move(answers)}});
                   }));
        server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (res.body.empty()) {
                res.set_content(json{{"error_code", res.status == 404 ? "not_found" : "http_error"},
                                     {"message", httplib::status_message(res.status)}}
                                    .dump(),
                                "application/json; charset=utf-8");
            }
        });
    }
};

HttpServer::HttpServer(AuthoringService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    int bound = -1;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (impl_->server.bind_to_port(host, port)) {
        bound = port;
    }
    if (bound <= 0) {
        throw Error("bind_failed", "cannot listen on " + host + ":" + std::to_string(port));
    }
    impl_->bound = true;
    return bound;
}

void HttpServer::run() {
    if (!impl_->bound) {
        throw Error("bind_failed", "run() before bind()");
    }
    impl_->server.listen_after_bind();
}

void HttpServer::stop() {
    if (impl_ && impl_->server.is_running()) {
        impl_->server.stop();
    }
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

} // namespace advqa
