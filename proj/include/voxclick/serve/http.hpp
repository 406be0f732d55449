#pragma once

#include <memory>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "voxclick/serve/session.hpp"

namespace httplib {
class Server;
}

namespace voxclick::serve {

struct HttpOptions {
  std::string host = "127.0.0.1";
  int port = 8765;  // 0 = any free port
  std::string default_model = "default";
  std::string cors_origin = "*";
};

nlohmann::json to_json(const MaskState& m);
nlohmann::json to_json(const SessionInfo& s);

// JSON over HTTP front end for a SessionService; see docs/segserve-api.md.
class HttpServer {
 public:
  HttpServer(std::shared_ptr<SessionService> service, HttpOptions options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds and serves on a background thread; returns the bound port.
  int start();
  // Binds and serves on the calling thread until stop().
  void run();
  void stop();
  int port() const { return port_; }

 private:
  void install_routes();
  int bind();

  std::shared_ptr<SessionService> service_;
  HttpOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace voxclick::serve
