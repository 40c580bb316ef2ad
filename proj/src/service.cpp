#include "lta/service.hpp"

#include <atomic>
#include <condition_variable>
#include <map>
#include <mutex>
#include <thread>

// After the lta headers: httplib defines macros that clash with Eigen.
#include <httplib.h>

namespace lta {

int http_status(Errc code) {
  switch (code) {
    case Errc::SessionNotFound: return 404;
    case Errc::InvalidTransition: return 409;
    case Errc::AuthError: return 401;
    case Errc::BackendUnavailable: return 503;
    case Errc::ParseError:
    case Errc::SchemaError:
    case Errc::ArgSchemaError:
    case Errc::ScenarioParseError:
    case Errc::InvalidConfiguration:
    case Errc::UnknownTool:
      return 400;
    default: return 500;
  }
}

namespace {

// One hosted session. `run` serializes commands in ticket order; the cached
// view (events, state, snapshots) has its own lock so reads never wait.
struct Hosted {
  std::unique_ptr<Session> session;

  std::mutex run_mu;
  std::condition_variable run_cv;
  std::uint64_t next_ticket = 0, serving = 0;

  std::mutex view_mu;
  std::condition_variable view_cv;
  std::vector<Json> events;
  std::string state;
  Json graph, world;

  void refresh() {
    state = std::string(to_string(session->state()));
    graph = Json::parse(to_json(session->graph()).dump());
    world = session->world().snapshot();
  }

  template <class F>
  void run(F&& f) {
    std::unique_lock lk(run_mu);
    const auto ticket = next_ticket++;
    run_cv.wait(lk, [&] { return serving == ticket; });
    try {
      f();
    } catch (...) {
      ++serving;
      run_cv.notify_all();
      throw;
    }
    ++serving;
    run_cv.notify_all();
  }
};

Json error_body(Errc code, const std::string& message) {
  return {{"error", std::string(to_string(code))}, {"message", message}};
}

void reply(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

}  // namespace

struct Service::Impl {
  SessionFactory factory;
  ServiceConfig config;
  httplib::Server server;
  std::thread thread;
  int port = -1;
  std::atomic<bool> stopping{false};

  std::mutex sessions_mu;
  std::map<std::string, std::shared_ptr<Hosted>> sessions;
  std::uint64_t created = 0;

  std::shared_ptr<Hosted> find(const std::string& id) {
    std::lock_guard lk(sessions_mu);
    auto it = sessions.find(id);
    if (it == sessions.end()) throw Error(Errc::SessionNotFound, "no session '" + id + "'");
    return it->second;
  }

  bool authorized(const httplib::Request& req) const {
    return config.token.empty() || req.get_header_value("Authorization") == "Bearer " + config.token;
  }

  // Wraps a handler with auth and error mapping.
  template <class F>
  httplib::Server::Handler wrap(F f) {
    return [this, f](const httplib::Request& req, httplib::Response& res) {
      if (!authorized(req)) return reply(res, 401, error_body(Errc::AuthError, "missing or wrong bearer token"));
      try {
        f(req, res);
      } catch (const Error& e) {
        reply(res, http_status(e.code()), error_body(e.code(), e.detail()));
      } catch (const nlohmann::json::exception& e) {
        reply(res, 400, error_body(Errc::ParseError, e.what()));
      } catch (const std::exception& e) {
        reply(res, 500, {{"error", "Internal"}, {"message", e.what()}});
      }
    };
  }

  static Json body_of(const httplib::Request& req) {
    if (req.body.empty()) return Json::object();
    Json j = Json::parse(req.body);
    if (!j.is_object()) throw Error(Errc::ParseError, "request body must be a JSON object");
    return j;
  }

  Json state_of(Hosted& h) {
    std::lock_guard lk(h.view_mu);
    return {{"state", h.state}, {"events", h.events.size()}};
  }

  void command(const httplib::Request& req, httplib::Response& res, const std::function<void(Session&, const Json&)>& f) {
    auto h = find(req.path_params.at("id"));
    const Json body = body_of(req);
    h->run([&] { f(*h->session, body); });
    reply(res, 200, state_of(*h));
  }

  void routes() {
    server.Post("/sessions", wrap([this](const httplib::Request& req, httplib::Response& res) {
      const Json body = body_of(req);
      std::string id;
      {
        std::lock_guard lk(sessions_mu);
        id = body.value("id", "s" + std::to_string(++created));
        if (sessions.count(id)) throw Error(Errc::InvalidConfiguration, "session '" + id + "' exists");
      }
      auto h = std::make_shared<Hosted>();
      h->session = factory(id, body);
      Hosted* raw = h.get();
      {
        std::lock_guard lk(h->view_mu);
        for (const auto& e : h->session->trace().events()) h->events.push_back(e.to_json());
        h->refresh();
      }
      // Runs on the command thread, inside Hosted::run.
      h->session->set_listener([raw](const TraceEvent& e) {
        std::lock_guard lk(raw->view_mu);
        raw->events.push_back(e.to_json());
        raw->refresh();
        raw->view_cv.notify_all();
      });
      {
        std::lock_guard lk(sessions_mu);
        sessions[id] = h;
      }
      reply(res, 201, {{"id", id}, {"state", state_of(*h)["state"]}});
    }));

    server.Get("/sessions", wrap([this](const httplib::Request&, httplib::Response& res) {
      std::vector<std::shared_ptr<Hosted>> all;
      Json out = Json::array();
      std::vector<std::string> ids;
      {
        std::lock_guard lk(sessions_mu);
        for (auto& [id, h] : sessions) {
          ids.push_back(id);
          all.push_back(h);
        }
      }
      for (std::size_t i = 0; i < all.size(); ++i) out.push_back({{"id", ids[i]}, {"state", state_of(*all[i])["state"]}});
      reply(res, 200, out);
    }));

    server.Post("/sessions/:id/messages", wrap([this](const httplib::Request& req, httplib::Response& res) {
      command(req, res, [](Session& s, const Json& b) { s.post_message(b.at("text").get<std::string>()); });
    }));
    server.Post("/sessions/:id/confirm", wrap([this](const httplib::Request& req, httplib::Response& res) {
      command(req, res, [](Session& s, const Json& b) { s.confirm(b.value("accept", true)); });
    }));
    server.Post("/sessions/:id/intervention", wrap([this](const httplib::Request& req, httplib::Response& res) {
      command(req, res, [](Session& s, const Json& b) { s.intervene(b.at("choice").get<std::string>()); });
    }));

    server.Get("/sessions/:id/state", wrap([this](const httplib::Request& req, httplib::Response& res) {
      reply(res, 200, state_of(*find(req.path_params.at("id"))));
    }));
    server.Get("/sessions/:id/graph", wrap([this](const httplib::Request& req, httplib::Response& res) {
      auto h = find(req.path_params.at("id"));
      std::lock_guard lk(h->view_mu);
      reply(res, 200, h->graph);
    }));
    server.Get("/sessions/:id/world", wrap([this](const httplib::Request& req, httplib::Response& res) {
      auto h = find(req.path_params.at("id"));
      std::lock_guard lk(h->view_mu);
      reply(res, 200, h->world);
    }));
    server.Get("/sessions/:id/trace", wrap([this](const httplib::Request& req, httplib::Response& res) {
      auto h = find(req.path_params.at("id"));
      std::string text;
      {
        std::lock_guard lk(h->view_mu);
        for (const auto& e : h->events) text += e.dump() + "\n";
      }
      res.status = 200;
      res.set_content(text, "application/x-ndjson");
    }));

    server.Get("/sessions/:id/events", wrap([this](const httplib::Request& req, httplib::Response& res) {
      auto h = find(req.path_params.at("id"));
      std::size_t from = 0;
      if (req.has_param("from")) from = std::stoul(req.get_param_value("from"));
      auto cursor = std::make_shared<std::size_t>(from);
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider("text/event-stream", [this, h, cursor](std::size_t, httplib::DataSink& sink) {
        std::string out;
        {
          std::unique_lock lk(h->view_mu);
          h->view_cv.wait_for(lk, std::chrono::milliseconds(200),
                              [&] { return stopping.load() || h->events.size() > *cursor; });
          if (stopping) return false;
          bool changed = false;
          for (; *cursor < h->events.size(); ++*cursor) {
            const Json& e = h->events[*cursor];
            out += "id: " + std::to_string(e.at("seq").get<std::uint64_t>()) + "\nevent: trace\ndata: " + e.dump() +
                   "\n\n";
            changed = true;
          }
          if (changed)
            out += "event: snapshot\ndata: " +
                   Json{{"state", h->state}, {"graph", h->graph}, {"world", h->world}}.dump() + "\n\n";
        }
        if (out.empty()) out = ": keepalive\n\n";
        return sink.write(out.data(), out.size());
      });
    }));
  }
};

Service::Service(SessionFactory factory, ServiceConfig config) : impl_(std::make_unique<Impl>()) {
  impl_->factory = std::move(factory);
  impl_->config = std::move(config);
  // Without SO_REUSEPORT, so a second server on the same port fails to bind.
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  impl_->routes();
}

Service::~Service() { stop(); }

int Service::bind() {
  if (impl_->port >= 0) return impl_->port;
  const auto& c = impl_->config;
  if (c.port == 0) {
    impl_->port = impl_->server.bind_to_any_port(c.host);
    if (impl_->port < 0) throw Error(Errc::PortInUse, "cannot bind " + c.host);
  } else {
    if (!impl_->server.bind_to_port(c.host, c.port))
      throw Error(Errc::PortInUse, "port " + std::to_string(c.port) + " on " + c.host + " is not available");
    impl_->port = c.port;
  }
  return impl_->port;
}

void Service::start() {
  bind();
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void Service::listen() {
  bind();
  impl_->server.listen_after_bind();
}

void Service::stop() {
  impl_->stopping = true;
  {
    std::lock_guard lk(impl_->sessions_mu);
    for (auto& [id, h] : impl_->sessions) h->view_cv.notify_all();
  }
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int Service::port() const { return impl_->port; }

}  // namespace lta
