#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>

#include "homeguard/controller.hpp"

namespace homeguard {

/// Source of logical time for the service. Mutations first move the engine clock here.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual Instant now() const = 0;
};

class ManualClock : public Clock {
 public:
  explicit ManualClock(Instant t = 0) : t_(t) {}
  Instant now() const override { return t_.load(); }
  void set(Instant t) { t_.store(t); }
  void advance(Instant dt) { t_ += dt; }

 private:
  std::atomic<Instant> t_;
};

class SystemClock : public Clock {
 public:
  Instant now() const override {
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
  }
};

struct HttpRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct HttpResponse {
  int status = 200;
  json body = json::object();
};

/// Maps an engine error code to an HTTP status.
int status_for(const std::string& code);

class Service {
 public:
  Service(Controller controller, std::shared_ptr<Clock> clock);

  /// Transport-free entry point; the HTTP server only forwards here.
  HttpResponse handle(const HttpRequest& req);

  Engine engine_copy() const;

 private:
  HttpResponse route(const HttpRequest& req);
  json mutate(const std::string& type, json payload);

  Controller controller_;
  std::shared_ptr<Clock> clock_;
  mutable std::shared_mutex mutex_;
};

struct ServeOptions {
  std::string addr = "127.0.0.1:8080";
  std::string store_dir = "homeguard-store";
  EngineConfig engine;
};

/// Resolves flags against ADDR / STORE_DIR: an explicit flag wins, then the env var, then the default.
ServeOptions resolve_serve_options(std::optional<std::string> addr_flag, std::optional<std::string> store_flag);

/// Blocks serving HTTP until `stop` (if given) is set by another thread or the process ends.
/// `on_listen` receives the bound port (useful with port 0).
int serve(const ServeOptions& opts, std::shared_ptr<Clock> clock = std::make_shared<SystemClock>(),
          std::function<void(int)> on_listen = {}, std::atomic<bool>* stop = nullptr);

}  // namespace homeguard
