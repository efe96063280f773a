#include "homeguard/store.hpp"

#include <sstream>

namespace homeguard {

void to_json(json& j, const StoredEvent& e) {
  j = json{{"seq", e.seq}, {"type", e.type}, {"at", e.at}, {"derived", e.derived}, {"payload", e.payload}};
  if (!e.result.is_null()) j["result"] = e.result;
}

void from_json(const json& j, StoredEvent& e) {
  e.seq = j.at("seq").get<std::uint64_t>();
  e.type = j.at("type").get<std::string>();
  e.at = j.at("at").get<Instant>();
  e.derived = j.value("derived", false);
  e.payload = j.value("payload", json::object());
  e.result = j.contains("result") ? j.at("result") : json(nullptr);
}

const std::vector<std::string>& input_event_types() {
  static const std::vector<std::string> types{
      "Bootstrapped",  "UserAdded",        "UserRemoved",      "UserResolved",   "DeviceAdded",   "DeviceRemoved",
      "PolicySubmitted", "SessionResponded", "CommandDecided", "PresenceChanged", "ClockAdvanced"};
  return types;
}

std::vector<StoredEvent> parse_log(std::string_view text) {
  std::vector<StoredEvent> out;
  std::size_t pos = 0;
  std::size_t line = 0;
  while (pos < text.size()) {
    ++line;
    auto nl = text.find('\n', pos);
    const bool terminated = nl != std::string_view::npos;
    if (!terminated) nl = text.size();
    const auto body = text.substr(pos, nl - pos);
    const auto where = "events.log line " + std::to_string(line) + " (byte " + std::to_string(pos) + ")";
    if (!body.empty()) {
      if (!terminated) throw Error("corrupt_log", where + ": truncated record");
      StoredEvent e;
      try {
        e = json::parse(body).get<StoredEvent>();
      } catch (const json::exception& ex) {
        throw Error("corrupt_log", where + ": " + ex.what());
      }
      if (e.seq != out.size() + 1)
        throw Error("corrupt_log", where + ": expected seq " + std::to_string(out.size() + 1) + ", found " +
                                       std::to_string(e.seq));
      out.push_back(std::move(e));
    }
    pos = nl + 1;
  }
  return out;
}

std::string snapshot_document(const EngineState& s) { return canonical(json(s)) + "\n"; }

EngineState parse_snapshot(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& ex) {
    throw Error("corrupt_snapshot", "state.snapshot byte " + std::to_string(ex.byte) + ": " + ex.what());
  }
  try {
    return j.get<EngineState>();
  } catch (const json::exception& ex) {
    throw Error("corrupt_snapshot", std::string("state.snapshot: ") + ex.what());
  }
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("storage_unavailable", "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

EventStore::EventStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error("storage_unavailable", "cannot create " + dir_.string() + ": " + ec.message());
  if (std::filesystem::exists(log_path())) seq_ = parse_log(read_file(log_path())).size();
  out_.open(log_path(), std::ios::app | std::ios::binary);
  if (!out_) throw Error("storage_unavailable", "cannot open " + log_path().string());
}

std::uint64_t EventStore::append(StoredEvent e) {
  e.seq = seq_ + 1;
  out_ << canonical(json(e)) << '\n';
  out_.flush();
  if (!out_) throw Error("storage_unavailable", "write to " + log_path().string() + " failed");
  return ++seq_;
}

std::vector<StoredEvent> EventStore::events() const { return parse_log(read_file(log_path())); }

void EventStore::save_snapshot(const EngineState& s) const {
  const auto tmp = dir_ / "state.snapshot.tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << snapshot_document(s);
    if (!out) throw Error("storage_unavailable", "cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, snapshot_path());
}

std::optional<EngineState> EventStore::load_snapshot() const {
  if (!std::filesystem::exists(snapshot_path())) return std::nullopt;
  return parse_snapshot(read_file(snapshot_path()));
}

namespace {

std::vector<DevicePolicyArray> arrays_of(const json& p) {
  if (p.contains("policies")) return p.at("policies").get<std::vector<DevicePolicyArray>>();
  if (p.is_array()) return p.get<std::vector<DevicePolicyArray>>();
  return {p.get<DevicePolicyArray>()};
}

}  // namespace

json apply_event(Engine& engine, const StoredEvent& e) {
  engine.set_time(e.at);
  const json& p = e.payload;
  try {
    if (e.type == "Bootstrapped") {
      engine.bootstrap(p.at("owner").get<std::string>());
      return json::object();
    }
    if (e.type == "UserAdded") return engine.add_user(p.get<UserRecord>());
    if (e.type == "UserRemoved") {
      engine.remove_user(p.at("user").get<std::string>(), p.at("actor").get<std::string>());
      return json::object();
    }
    if (e.type == "UserResolved") {
      engine.resolve_user(p.at("user").get<std::string>(), p.at("resolver").get<std::string>(),
                          p.at("priority").get<int>());
      return json::object();
    }
    if (e.type == "DeviceAdded") {
      const auto d = p.at("device").get<DeviceDescriptor>();
      if (!p.contains("actor") || p.at("actor").is_null()) {
        engine.register_device(d);
        return json::object();
      }
      return engine.add_device(p.at("actor").get<std::string>(), d);
    }
    if (e.type == "DeviceRemoved") return engine.remove_device(p.at("actor").get<std::string>(), p.at("id").get<std::string>());
    if (e.type == "PolicySubmitted") {
      if (p.contains("text")) return engine.submit_text(p.at("text").get<std::string>(), p.value("origin", "<request>"));
      return engine.submit_arrays(arrays_of(p));
    }
    if (e.type == "SessionResponded") {
      auto rep = engine.respond(SessionId{p.at("session").get<std::uint64_t>()}, p.at("party").get<std::string>(),
                                verdict_from_string(p.at("verdict").get<std::string>()));
      return json{{"session", rep.session}, {"steps", rep.steps}};
    }
    if (e.type == "CommandDecided") return engine.command(p.at("command").get<DeviceCommand>());
    if (e.type == "PresenceChanged") {
      engine.set_presence(p.at("user").get<std::string>(), presence_from_string(p.at("presence").get<std::string>()));
      return json::object();
    }
    if (e.type == "ClockAdvanced") {
      engine.set_time(p.at("to").get<Instant>());
      return json{{"now", engine.now()}};
    }
  } catch (const json::exception& ex) {
    throw Error("bad_document", ex.what());
  }
  throw Error("bad_event", "not a replayable event type '" + e.type + "'");
}

Engine replay(const std::vector<StoredEvent>& log, EngineConfig config) {
  Engine engine(config);
  for (const auto& e : log) {
    if (e.derived) continue;
    try {
      apply_event(engine, e);
    } catch (const Error&) {
      // rejected live too; any side effects were re-done above
    }
  }
  engine.drain_derived();
  return engine;
}

}  // namespace homeguard
