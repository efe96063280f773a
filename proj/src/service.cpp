#include "homeguard/service.hpp"

#include <cstdlib>
#include <mutex>
#include <thread>

#include "httplib.h"

namespace homeguard {

int status_for(const std::string& code) {
  static const std::map<std::string, int> table{
      {"unknown_user", 404},
      {"unknown_device", 404},
      {"unknown_session", 404},
      {"unknown_owner", 404},
      {"UnknownCommander", 404},
      {"not_found", 404},
      {"forbidden", 403},
      {"NotParty", 403},
      {"AssignAboveOwnAuthority", 403},
      {"DevicePermEscalation", 403},
      {"CommanderExpired", 403},
      {"NotAuthorized", 403},
      {"SessionClosed", 409},
      {"AlreadyResponded", 409},
      {"CommanderPending", 409},
      {"device_exists", 409},
      {"NotPending", 409},
      {"AlreadyBootstrapped", 409},
      {"storage_unavailable", 503},
  };
  auto it = table.find(code);
  return it == table.end() ? 400 : it->second;
}

namespace {

std::vector<std::string> segments(const std::string& path) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= path.size()) {
    auto next = path.find('/', pos);
    if (next == std::string::npos) next = path.size();
    if (next > pos) out.push_back(path.substr(pos, next - pos));
    pos = next + 1;
  }
  return out;
}

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw Error("bad_document", "malformed body at byte " + std::to_string(e.byte));
  }
}

HttpResponse error_response(const Error& e) {
  json body{{"error", e.code()}, {"message", e.what()}};
  if (const auto* se = dynamic_cast<const SubmitError*>(&e)) body["diagnostics"] = se->diagnostics;
  return {status_for(e.code()), body};
}

int decision_status(const json& d) {
  if (d.at("verdict") == "allow") return 200;
  if (d.at("reason") == "pending_resolution") return 409;
  return 403;
}

json users_doc(const EngineState& s) {
  json out = json::array();
  for (const auto& [id, e] : s.priorities.entries()) {
    json u = e;
    u["id"] = id;
    auto p = s.presence.find(id);
    u["presence"] = std::string(to_string(p == s.presence.end() ? Presence::Away : p->second));
    out.push_back(u);
  }
  return out;
}

json submit_doc(const json& result) {
  // conflicts created by this submission, next to the full report
  json out = result;
  json conflicts = json::array();
  for (const auto& s : result.at("steps")) conflicts.push_back(s.at("conflict"));
  out["conflicts"] = conflicts;
  return out;
}

}  // namespace

Service::Service(Controller controller, std::shared_ptr<Clock> clock)
    : controller_(std::move(controller)), clock_(std::move(clock)) {}

Engine Service::engine_copy() const {
  std::shared_lock lock(mutex_);
  return controller_.engine();
}

json Service::mutate(const std::string& type, json payload) {
  // caller holds the unique lock
  if (clock_) controller_.advance_to(clock_->now());
  struct Snap {
    Controller& c;
    ~Snap() {
      try {
        c.save_snapshot();
      } catch (const Error&) {
      }
    }
  } snap{controller_};
  return controller_.execute(type, std::move(payload));
}

HttpResponse Service::handle(const HttpRequest& req) {
  try {
    return route(req);
  } catch (const Error& e) {
    return error_response(e);
  } catch (const json::exception& e) {
    return {400, json{{"error", "bad_document"}, {"message", e.what()}}};
  }
}

HttpResponse Service::route(const HttpRequest& req) {
  const auto seg = segments(req.path);
  const auto& m = req.method;
  auto query = [&](const std::string& k) -> std::optional<std::string> {
    auto it = req.query.find(k);
    if (it == req.query.end()) return std::nullopt;
    return it->second;
  };
  auto need = [&](const std::string& k) {
    auto v = query(k);
    if (!v || v->empty()) throw Error("bad_document", "missing query parameter '" + k + "'");
    return *v;
  };

  if (m == "GET") {
    std::shared_lock lock(mutex_);
    const auto& st = controller_.engine().state();
    if (seg == std::vector<std::string>{"users"}) return {200, users_doc(st)};
    if (seg == std::vector<std::string>{"policies"}) return {200, json(controller_.engine().policies())};
    if (seg == std::vector<std::string>{"conflicts"}) return {200, json(st.conflicts)};
    if (seg == std::vector<std::string>{"negotiations"}) {
      json out = json::array();
      for (const auto& [_, s] : st.sessions) out.push_back(s);
      return {200, out};
    }
    if (seg == std::vector<std::string>{"notifications"}) {
      std::uint64_t since = 0;
      if (auto s = query("since")) {
        try {
          since = std::stoull(*s);
        } catch (const std::exception&) {
          throw Error("bad_document", "since must be a sequence number");
        }
      }
      return {200, json(controller_.engine().notifications_since(since))};
    }
    if (seg == std::vector<std::string>{"devices"}) {
      json out = json::array();
      for (const auto& [_, d] : st.devices) out.push_back(d);
      return {200, out};
    }
    if (seg == std::vector<std::string>{"rules"}) return {200, json(controller_.engine().rules())};
    if (seg == std::vector<std::string>{"state"}) return {200, json(st)};
    throw Error("not_found", "no route GET " + req.path);
  }

  std::unique_lock lock(mutex_);
  if (m == "POST" && seg == std::vector<std::string>{"users"}) {
    auto body = parse_body(req.body);
    const bool empty = controller_.engine().state().priorities.empty();
    const auto commander = body.value("commander", json(nullptr));
    if (empty && (commander.is_null() || commander == body.value("new_user", json(nullptr)))) {
      mutate("Bootstrapped", {{"owner", body.at("new_user")}});
      return {201, json{{"ok", true}, {"outcome", "bootstrapped"}, {"user", body.at("new_user")}}};
    }
    auto rep = mutate("UserAdded", body);
    if (!rep.at("ok").get<bool>()) {
      rep["status"] = status_for(rep.at("error").get<std::string>());
      return {rep["status"].get<int>(), rep};
    }
    return {rep.at("outcome") == "inserted" ? 201 : 200, rep};
  }
  if (m == "DELETE" && seg.size() == 2 && seg[0] == "users") {
    mutate("UserRemoved", {{"user", seg[1]}, {"actor", need("actor")}});
    return {200, json{{"removed", seg[1]}}};
  }
  if (m == "POST" && seg.size() == 3 && seg[0] == "users" && seg[2] == "resolve") {
    auto body = parse_body(req.body);
    mutate("UserResolved", {{"user", seg[1]}, {"resolver", body.at("resolver")}, {"priority", body.at("priority")}});
    return {200, json{{"resolved", seg[1]}}};
  }
  if (m == "POST" && seg == std::vector<std::string>{"policies"}) {
    json payload;
    try {
      payload = json::parse(req.body);
    } catch (const json::parse_error&) {
      payload = json{{"text", req.body}};  // raw policy-language text
    }
    if (payload.is_string()) payload = json{{"text", payload}};
    return {201, submit_doc(mutate("PolicySubmitted", payload))};
  }
  if (m == "POST" && seg.size() == 3 && seg[0] == "negotiations" && seg[2] == "respond") {
    auto body = parse_body(req.body);
    std::uint64_t id = 0;
    try {
      id = std::stoull(seg[1]);
    } catch (const std::exception&) {
      throw Error("unknown_session", "unknown session '" + seg[1] + "'");
    }
    return {200, mutate("SessionResponded", {{"session", id}, {"party", body.at("party")}, {"verdict", body.at("verdict")}})};
  }
  if (m == "POST" && seg == std::vector<std::string>{"commands"}) {
    auto body = parse_body(req.body);
    (void)body.get<DeviceCommand>();  // reject malformed commands before logging
    auto d = mutate("CommandDecided", {{"command", body}});
    return {decision_status(d), d};
  }
  if (m == "PUT" && seg.size() == 2 && seg[0] == "presence") {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::parse_error&) {
      body = req.body;
    }
    const auto p = body.is_object() ? body.at("presence").get<std::string>() : body.get<std::string>();
    (void)presence_from_string(p);
    mutate("PresenceChanged", {{"user", seg[1]}, {"presence", p}});
    return {200, json{{"user", seg[1]}, {"presence", p}}};
  }
  if (m == "POST" && seg == std::vector<std::string>{"devices"}) {
    auto body = parse_body(req.body);
    const auto actor = body.value("actor", std::string{});
    if (actor.empty()) throw Error("bad_document", "adding a device needs an actor");
    json dev = body.contains("device") ? body.at("device") : body;
    dev.erase("actor");
    (void)dev.get<DeviceDescriptor>();
    auto d = mutate("DeviceAdded", {{"actor", actor}, {"device", dev}});
    return {d.at("verdict") == "allow" ? 201 : decision_status(d), d};
  }
  if (m == "DELETE" && seg.size() == 2 && seg[0] == "devices") {
    auto d = mutate("DeviceRemoved", {{"actor", need("actor")}, {"id", seg[1]}});
    return {decision_status(d), d};
  }
  throw Error("not_found", "no route " + m + " " + req.path);
}

ServeOptions resolve_serve_options(std::optional<std::string> addr_flag, std::optional<std::string> store_flag) {
  ServeOptions o;
  if (const char* a = std::getenv("ADDR"); a && *a) o.addr = a;
  if (const char* s = std::getenv("STORE_DIR"); s && *s) o.store_dir = s;
  if (addr_flag) o.addr = *addr_flag;
  if (store_flag) o.store_dir = *store_flag;
  return o;
}

int serve(const ServeOptions& opts, std::shared_ptr<Clock> clock, std::function<void(int)> on_listen,
          std::atomic<bool>* stop) {
  const auto colon = opts.addr.rfind(':');
  const std::string host = colon == std::string::npos ? opts.addr : opts.addr.substr(0, colon);
  int port = 8080;
  if (colon != std::string::npos) {
    try {
      port = std::stoi(opts.addr.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error("bad_address", "cannot parse port in '" + opts.addr + "'");
    }
  }

  auto controller = Controller::open(opts.engine, std::make_unique<EventStore>(opts.store_dir));
  Service service(std::move(controller), std::move(clock));

  httplib::Server svr;
  auto handler = [&](const httplib::Request& r, httplib::Response& res) {
    HttpRequest req{r.method, r.path, {}, r.body};
    for (const auto& [k, v] : r.params) req.query[k] = v;
    auto out = service.handle(req);
    res.status = out.status;
    res.set_content(canonical(out.body), "application/json");
  };
  svr.Get(".*", handler);
  svr.Post(".*", handler);
  svr.Put(".*", handler);
  svr.Delete(".*", handler);

  if (port == 0) {
    port = svr.bind_to_any_port(host);
  } else if (!svr.bind_to_port(host, port)) {
    port = -1;
  }
  if (port < 0) throw Error("bind_failed", "cannot bind " + opts.addr);
  if (on_listen) on_listen(port);

  std::thread watcher;
  if (stop) {
    watcher = std::thread([&] {
      while (!stop->load()) std::this_thread::sleep_for(std::chrono::milliseconds(10));
      svr.stop();
    });
  }
  const bool ok = svr.listen_after_bind();
  if (stop) stop->store(true);
  if (watcher.joinable()) watcher.join();
  return ok ? 0 : 1;
}

}  // namespace homeguard
