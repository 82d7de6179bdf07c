#include "gwl/http_server.hpp"

#include <httplib.h>

namespace gwl::service {

using nlohmann::json;

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotFound: return 404;
    case ErrorKind::BadRequest: return 400;
    case ErrorKind::Conflict: return 409;
    case ErrorKind::Protocol: return 409;
    case ErrorKind::Parse: return 422;
  }
  return 500;
}

struct HttpServer::Impl {
  TutorService& service;
  httplib::Server server;
  std::atomic<bool> stopping{false};

  explicit Impl(TutorService& s) : service(s) {}

  static void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  // Runs a handler, turning exceptions into JSON error bodies.
  template <typename F>
  static void guarded(httplib::Response& res, F&& f) {
    try {
      f();
    } catch (const ServiceError& e) {
      reply(res, http_status(e.kind()),
            {{"error", e.what()}, {"kind", name(e.kind())}, {"accepted_patterns", e.patterns()}});
    } catch (const json::exception& e) {
      reply(res, 400, {{"error", std::string("malformed JSON: ") + e.what()}, {"kind", "bad_request"}});
    } catch (const std::exception& e) {
      reply(res, 500, {{"error", e.what()}, {"kind", "internal"}});
    }
  }

  static json body_of(const httplib::Request& req) {
    if (req.body.empty()) return json(nullptr);
    return json::parse(req.body);
  }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type, Last-Event-ID");
      res.status = 204;
    });

    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto id = service.create_session(parse_session_options(body_of(req)));
        reply(res, 201, service.get_state(id));
      });
    });
    server.Get(R"(/sessions/([^/]+)/state)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, 200, service.get_state(req.matches[1])); });
    });
    server.Get(R"(/sessions/([^/]+)/object\.png)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto png = service.object_png(req.matches[1]);
        res.set_content(std::string(png.begin(), png.end()), "image/png");
      });
    });
    server.Post(R"(/sessions/([^/]+)/utterance)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto body = body_of(req);
        if (!body.is_object() || !body.contains("text") || !body["text"].is_string()) {
          throw ServiceError(ErrorKind::BadRequest, "body must be {\"text\": \"...\"}", accepted_patterns());
        }
        const auto r = service.post_tutor_utterance(req.matches[1], body["text"].get<std::string>());
        json learner = json::array();
        for (const auto& t : r.learner) learner.push_back(to_json(t));
        reply(res, 200, {{"tutor", to_json(r.tutor)}, {"learner", learner}, {"cost_delta", r.cost_delta},
                         {"state", r.state}});
      });
    });
    server.Post(R"(/sessions/([^/]+)/advance)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, 200, service.advance_object(req.matches[1])); });
    });
    server.Post(R"(/sessions/([^/]+)/save)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto body = body_of(req);
        std::optional<std::filesystem::path> path;
        if (body.is_object() && body.contains("path")) path = body["path"].get<std::string>();
        reply(res, 200, {{"path", service.save(req.matches[1], path).string()}});
      });
    });
    server.Get(R"(/sessions/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      guarded(res, [&] {
        service.get_state(id);  // 404 before switching to a stream
        std::uint64_t after = 0;
        if (req.has_header("Last-Event-ID")) after = std::stoull(req.get_header_value("Last-Event-ID"));
        if (req.has_param("after")) after = std::stoull(req.get_param_value("after"));
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider(
            "text/event-stream", [this, id, after](std::size_t, httplib::DataSink& sink) mutable {
              if (stopping) return false;
              const auto events = service.events_after(id, after, std::chrono::milliseconds(500));
              if (events.empty()) {
                const std::string ping = ": keep-alive\n\n";
                return sink.write(ping.data(), ping.size());
              }
              for (const auto& e : events) {
                const std::string chunk = "id: " + std::to_string(e.seq) + "\nevent: " + e.type +
                                          "\ndata: " + e.data.dump() + "\n\n";
                if (!sink.write(chunk.data(), chunk.size())) return false;
                after = e.seq;
              }
              return true;
            });
      });
    });
  }
};

HttpServer::HttpServer(TutorService& service) : impl_(std::make_unique<Impl>(service)) { impl_->routes(); }

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  if (!impl_->server.bind_to_port(host, port)) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::serve() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (!impl_) return;
  impl_->stopping = true;
  impl_->service.shutdown();
  impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace gwl::service
