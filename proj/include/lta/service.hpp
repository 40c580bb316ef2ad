#pragma once

#include <functional>
#include <memory>
#include <string>

#include "lta/orchestrator.hpp"

namespace lta {

// Builds a session from the body of POST /sessions. Throws lta::Error for a
// bad request (ScenarioParseError, InvalidConfiguration, ...).
using SessionFactory = std::function<std::unique_ptr<Session>(const std::string& id, const Json& body)>;

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::string token;  // when set, requests need "Authorization: Bearer <token>"
};

// HTTP surface of the orchestrator (see docs/service_api.md).
//
//   POST /sessions                       create          -> 201 {"id", "state"}
//   GET  /sessions                       list            -> [{"id", "state"}]
//   POST /sessions/{id}/messages         {"text"}        -> {"state"}
//   POST /sessions/{id}/confirm          {"accept"}      -> {"state"}
//   POST /sessions/{id}/intervention     {"choice"}      -> {"state"}
//   GET  /sessions/{id}/state | trace | graph | world
//   GET  /sessions/{id}/events?from=N    server-sent events
//
// Commands to one session run one at a time in arrival order; reads never
// wait for a running command.
class Service {
 public:
  Service(SessionFactory factory, ServiceConfig config = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds the socket; PortInUse if that fails. Returns the bound port.
  int bind();
  // Serves on a background thread (binds first if needed).
  void start();
  // Serves on the calling thread until stop().
  void listen();
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// HTTP status for an error code.
int http_status(Errc code);

}  // namespace lta
