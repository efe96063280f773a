#include "homeguard/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <random>
#include <set>

namespace homeguard {

namespace {

const std::map<std::string, std::string>& event_types() {
  static const std::map<std::string, std::string> m{
      {"AddUser", "UserAdded"},          {"RemoveUser", "UserRemoved"},     {"ResolveUser", "UserResolved"},
      {"AddDevice", "DeviceAdded"},      {"RemoveDevice", "DeviceRemoved"}, {"SubmitPolicy", "PolicySubmitted"},
      {"Respond", "SessionResponded"},   {"Command", "CommandDecided"},     {"SetPresence", "PresenceChanged"},
      {"AdvanceClock", "ClockAdvanced"},
  };
  return m;
}

const std::set<std::string>& expectation_keys() {
  static const std::set<std::string> k{"conflicts", "outcomes",     "verdict", "threat", "reason", "notify",
                                       "session_state", "escalated_to", "region", "error", "removed", "note"};
  return k;
}

[[noreturn]] void invalid(const std::string& what) { throw Error("script_invalid", what); }

std::string where(std::size_t i, const ScriptEvent& e) { return "event " + std::to_string(i) + " (" + e.kind + ")"; }

}  // namespace

void LatencyStats::add(double ms) {
  if (count == 0 || ms < min_ms) min_ms = ms;
  if (count == 0 || ms > max_ms) max_ms = ms;
  mean_ms = (mean_ms * count + ms) / (count + 1);
  ++count;
}

void to_json(json& j, const ScenarioScript& s) {
  json events = json::array();
  for (const auto& e : s.events) {
    json o = e.body;
    o["event"] = e.kind;
    if (e.at) o["at"] = *e.at;
    events.push_back(o);
  }
  json expectations = json::array();
  for (const auto& x : s.expectations) {
    json o = x.expected;
    o["event"] = x.event;
    expectations.push_back(o);
  }
  j = json{{"name", s.name},          {"description", s.description}, {"owner", s.owner},
           {"devices", s.devices},    {"users", s.users},             {"events", events},
           {"expectations", expectations}};
  if (s.declared_conflicts) j["declared"] = json{{"conflicts", *s.declared_conflicts}};
}

ScenarioScript parse_script(const json& j) {
  ScenarioScript s;
  try {
    if (!j.is_object()) invalid("script must be an object");
    s.name = j.at("name").get<std::string>();
    s.description = j.value("description", "");
    s.owner = j.value("owner", "admin");
    for (const auto& d : j.value("devices", json::array())) s.devices.push_back(d.get<DeviceDescriptor>());
    for (const auto& u : j.value("users", json::array())) s.users.push_back(u.get<UserRecord>());
    for (const auto& e : j.value("events", json::array())) {
      ScriptEvent ev;
      ev.kind = e.at("event").get<std::string>();
      if (e.contains("at")) ev.at = e.at("at").get<Instant>();
      ev.body = e;
      ev.body.erase("event");
      ev.body.erase("at");
      s.events.push_back(std::move(ev));
    }
    for (const auto& x : j.value("expectations", json::array())) {
      Expectation ex;
      ex.event = x.at("event").get<std::size_t>();
      ex.expected = x;
      ex.expected.erase("event");
      s.expectations.push_back(std::move(ex));
    }
    if (j.contains("declared")) s.declared_conflicts = j.at("declared").at("conflicts").get<std::map<std::string, int>>();
  } catch (const json::exception& e) {
    invalid(e.what());
  } catch (const Error& e) {
    if (e.code() == "script_invalid") throw;
    invalid(e.what());
  }

  Instant clock = 0;
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    const auto& e = s.events[i];
    if (!event_types().count(e.kind)) invalid(where(i, e) + ": unknown event kind");
    if (e.kind == "AdvanceClock") {
      const auto to = e.at ? *e.at : e.body.value("to", clock);
      if (to < clock) invalid(where(i, e) + ": events must be sorted by time");
      clock = to;
    } else if (e.at && *e.at != clock) {
      invalid(where(i, e) + ": at " + std::to_string(*e.at) + " but the clock reads " + std::to_string(clock) +
              "; only AdvanceClock moves time");
    }
  }
  for (const auto& x : s.expectations) {
    if (x.event >= s.events.size()) invalid("expectation names event " + std::to_string(x.event) + " which does not exist");
    if (x.expected.empty()) invalid("expectation for event " + std::to_string(x.event) + " checks nothing");
    for (const auto& [k, _] : x.expected.items())
      if (!expectation_keys().count(k)) invalid("unknown expectation key '" + k + "'");
  }
  return s;
}

ScenarioScript load_script(const std::filesystem::path& p) {
  json j;
  try {
    j = json::parse(read_file(p));
  } catch (const json::parse_error& e) {
    invalid(p.string() + " byte " + std::to_string(e.byte) + ": " + e.what());
  }
  return parse_script(j);
}

void to_json(json& j, const LatencyStats& s) {
  j = json{{"count", s.count}, {"min_ms", s.min_ms}, {"mean_ms", s.mean_ms}, {"max_ms", s.max_ms}};
}

namespace {

json result_doc(const ExpectationResult& r) {
  return json{{"event", r.event ? json(*r.event) : json(nullptr)},
              {"expected", r.expected},
              {"observed", r.observed},
              {"passed", r.passed},
              {"message", r.message}};
}

json report_core(const RunReport& r) {
  json results = json::array();
  for (const auto& x : r.results) results.push_back(result_doc(x));
  return json{{"name", r.name},     {"results", results},           {"passed", r.passed},  {"total", r.total},
              {"failed", r.total - r.passed}, {"success_rate", r.success_rate}, {"conflicts", r.conflicts},
              {"events", r.events}};
}

}  // namespace

void to_json(json& j, const RunReport& r) {
  j = report_core(r);
  j["latency"] = json{{"decision", r.decisions}, {"negotiation", r.negotiations}, {"step", r.steps}};
}

json without_latency(const RunReport& r) { return report_core(r); }

namespace {

struct Observation {
  json error = nullptr;
  json result = nullptr;
  std::vector<std::string> conflicts;
  std::vector<std::string> outcomes;
  std::optional<std::uint64_t> session;
  std::vector<std::string> escalations;
  std::vector<UserId> notified;
  std::vector<std::string> messages;
};

json threat_of(const Observation& o) {
  if (o.result.is_object() && o.result.contains("threat")) return o.result.at("threat");
  return nullptr;
}

bool is_subset(const std::vector<std::string>& want, const std::vector<std::string>& have) {
  return std::all_of(want.begin(), want.end(),
                     [&](const std::string& w) { return std::find(have.begin(), have.end(), w) != have.end(); });
}

ExpectationResult check(const std::string& key, const json& want, const Observation& o, const Engine& engine) {
  ExpectationResult r;
  r.expected = json{{key, want}};
  auto set = [&](json observed, bool ok) {
    r.observed = json{{key, observed}};
    r.passed = ok;
  };
  const auto& st = engine.state();
  if (key == "conflicts") {
    set(o.conflicts, want.get<std::vector<std::string>>() == o.conflicts);
  } else if (key == "outcomes") {
    set(o.outcomes, want.get<std::vector<std::string>>() == o.outcomes);
  } else if (key == "verdict" || key == "reason") {
    const json got = o.result.is_object() && o.result.contains(key) ? o.result.at(key) : json(nullptr);
    set(got, got == want);
  } else if (key == "threat") {
    const json got = threat_of(o);
    const json w = want == "none" ? json(nullptr) : want;
    set(got, got == w);
  } else if (key == "notify") {
    const auto w = want.is_array() ? want.get<std::vector<std::string>>() : std::vector<std::string>{want.get<std::string>()};
    set(o.notified, is_subset(w, o.notified));
  } else if (key == "note") {
    // substring of some notification emitted by the event
    const auto w = want.get<std::string>();
    const bool ok = std::any_of(o.messages.begin(), o.messages.end(),
                                [&](const std::string& m) { return m.find(w) != std::string::npos; });
    set(o.messages, ok);
  } else if (key == "session_state") {
    json got = nullptr;
    if (o.session) {
      auto it = st.sessions.find(SessionId{*o.session});
      if (it != st.sessions.end()) got = std::string(to_string(it->second.state));
    }
    set(got, got == want);
  } else if (key == "escalated_to") {
    std::vector<std::string> got = o.escalations;
    if (o.session) {
      auto it = st.sessions.find(SessionId{*o.session});
      if (it != st.sessions.end() && it->second.state == SessionState::Escalated) got.push_back(it->second.escalate_to);
    }
    set(got, std::find(got.begin(), got.end(), want.get<std::string>()) != got.end());
  } else if (key == "error") {
    set(o.error, o.error == want);
  } else if (key == "removed") {
    std::vector<std::string> still;
    for (const auto& u : want.get<std::vector<std::string>>())
      if (st.priorities.contains(u)) still.push_back(u);
    set(json{{"still_present", still}}, still.empty());
  } else if (key == "region") {
    const auto user = want.at("user").get<std::string>();
    const auto device = want.at("device").get<std::string>();
    auto dev = st.devices.find(device);
    if (dev == st.devices.end()) invalid("region expectation names unknown device '" + device + "'");
    const auto attr = want.value("attribute", dev->second.value_attribute ? dev->second.value_attribute->name : "");
    std::optional<Origin> origin;
    if (want.contains("origin")) origin = origin_from_string(want.at("origin").get<std::string>());
    const auto got = effective_region(user, device, attr, engine.domains().domain_of(attr), engine.rules(),
                                      st.priorities, st.presence, st.now, st.devices, origin);
    const auto expect = want.at("equals").get<IntervalSet>();
    set(json{{"user", user}, {"device", device}, {"attribute", attr}, {"equals", got}}, got == expect);
  }
  r.message = r.passed ? "ok" : "expected " + r.expected.dump() + ", observed " + r.observed.dump();
  return r;
}

void collect_steps(const json& steps, Observation& o, std::map<std::string, int>& counts) {
  for (const auto& s : steps) {
    const auto cls = s.at("conflict").at("class").get<std::string>();
    o.conflicts.push_back(cls);
    ++counts[cls];
    const auto& out = s.at("outcome");
    o.outcomes.push_back(out.at("kind").get<std::string>());
    if (!out.at("session").is_null()) o.session = out.at("session").get<std::uint64_t>();
    if (out.at("kind") == "Escalated") o.escalations.push_back(out.at("escalated_to").get<std::string>());
  }
}

bool needs_device(const json& cmd) {
  const auto verb = cmd.value("verb", "");
  return verb != "add_device" && verb != "install_app";
}

}  // namespace

RunReport run(const ScenarioScript& script, const RunOptions& opts) {
  std::unique_ptr<EventStore> store;
  if (opts.store_dir) store = std::make_unique<EventStore>(*opts.store_dir);
  Controller c(opts.config, std::move(store));
  RunReport rep;
  rep.name = script.name;
  rep.events = script.events.size();

  auto setup = [&](const std::string& type, json payload, const std::string& what) {
    try {
      auto res = c.execute(type, std::move(payload));
      if (res.is_object() && res.contains("ok") && !res.at("ok").get<bool>())
        invalid(what + ": " + res.at("message").get<std::string>());
    } catch (const Error& e) {
      if (e.code() == "script_invalid") throw;
      invalid(what + ": " + e.what());
    }
  };
  setup("Bootstrapped", json{{"owner", script.owner}}, "bootstrap " + script.owner);
  for (const auto& d : script.devices) setup("DeviceAdded", json{{"device", d}}, "device " + d.id);
  for (const auto& u : script.users) setup("UserAdded", json(u), "user " + u.new_user);

  std::map<std::size_t, std::vector<const Expectation*>> by_event;
  for (const auto& x : script.expectations) by_event[x.event].push_back(&x);
  std::optional<std::uint64_t> last_session;

  for (std::size_t i = 0; i < script.events.size(); ++i) {
    const auto& ev = script.events[i];
    const auto& engine = c.engine();
    const auto& st = engine.state();
    json payload = ev.body;
    if (ev.kind == "AdvanceClock") {
      payload = json{{"to", ev.at ? *ev.at : ev.body.value("to", engine.now())}};
    } else if (ev.kind == "AddUser") {
      if (payload.contains("record")) payload = payload.at("record");
    } else if (ev.kind == "Command") {
      if (payload.contains("command")) payload = payload.at("command");
      if (needs_device(payload) && !st.devices.count(payload.value("device", "")))
        invalid(where(i, ev) + ": unknown device '" + payload.value("device", "") + "'");
      payload = json{{"command", payload}};
    } else if (ev.kind == "SetPresence") {
      if (!st.priorities.contains(payload.value("user", ""))) invalid(where(i, ev) + ": unknown user");
    } else if (ev.kind == "RemoveDevice") {
      if (!st.devices.count(payload.value("id", ""))) invalid(where(i, ev) + ": unknown device");
    } else if (ev.kind == "Respond") {
      if (payload.value("session", json(nullptr)) == "last") {
        if (!last_session) invalid(where(i, ev) + ": no session has been opened");
        payload["session"] = *last_session;
      }
    }

    Observation o;
    const auto before = st.notifications.size();
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o.result = c.execute(event_types().at(ev.kind), payload);
    } catch (const Error& e) {
      o.error = e.code();
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    if (ev.kind == "Command") rep.decisions.add(ms);
    if (ev.kind == "SubmitPolicy" || ev.kind == "Respond") rep.negotiations.add(ms);
    rep.steps.add(ms);
    if (ev.kind == "AddUser" && o.result.is_object() && !o.result.at("ok").get<bool>()) o.error = o.result.at("error");
    if (o.result.is_object() && o.result.contains("steps")) collect_steps(o.result.at("steps"), o, rep.conflicts);
    if (ev.kind == "Respond" && o.result.is_object()) o.session = o.result.at("session").at("id").get<std::uint64_t>();
    if (ev.kind == "SubmitPolicy" && o.result.is_object() && !o.result.at("sessions").empty())
      o.session = o.result.at("sessions").back().get<std::uint64_t>();
    if (o.session && (!last_session || *o.session > *last_session) && ev.kind != "Respond") last_session = o.session;
    for (const auto& n : engine.notifications_since(before)) {
      if (std::find(o.notified.begin(), o.notified.end(), n.notice.recipient) == o.notified.end())
        o.notified.push_back(n.notice.recipient);
      o.messages.push_back(n.notice.message);
    }

    auto it = by_event.find(i);
    const bool expects_error = it != by_event.end() && std::any_of(it->second.begin(), it->second.end(),
                                                                   [](const Expectation* x) {
                                                                     return x->expected.contains("error");
                                                                   });
    if (!expects_error && (o.error == "unknown_device" || o.error == "unknown_owner" || o.error == "unknown_user"))
      invalid(where(i, ev) + ": references an unknown " + o.error.get<std::string>().substr(8));
    if (it == by_event.end()) continue;
    for (const auto* x : it->second) {
      ExpectationResult merged;
      merged.event = i;
      merged.passed = true;
      merged.expected = x->expected;
      merged.observed = json::object();
      std::vector<std::string> failures;
      for (const auto& [k, v] : x->expected.items()) {
        auto r = check(k, v, o, engine);
        for (const auto& [ok, ov] : r.observed.items()) merged.observed[ok] = ov;
        if (!r.passed) {
          merged.passed = false;
          failures.push_back(r.message);
        }
      }
      if (merged.passed) {
        merged.message = "ok";
      } else {
        for (const auto& f : failures) merged.message += (merged.message.empty() ? "" : "; ") + f;
      }
      rep.results.push_back(std::move(merged));
    }
  }

  if (script.declared_conflicts) {
    ExpectationResult r;
    r.expected = json{{"conflicts", *script.declared_conflicts}};
    r.observed = json{{"conflicts", rep.conflicts}};
    r.passed = true;
    for (const auto* cls : {"HPC", "SPC", "HCC", "SCC", "RC"}) {
      auto d = script.declared_conflicts->find(cls);
      auto g = rep.conflicts.find(cls);
      if ((d == script.declared_conflicts->end() ? 0 : d->second) != (g == rep.conflicts.end() ? 0 : g->second))
        r.passed = false;
    }
    r.message = r.passed ? "declared conflict counts match" : "declared conflict counts differ";
    rep.results.push_back(std::move(r));
  }

  rep.total = rep.results.size();
  rep.passed = static_cast<std::size_t>(std::count_if(rep.results.begin(), rep.results.end(),
                                                      [](const ExpectationResult& r) { return r.passed; }));
  rep.success_rate = rep.total == 0 ? 1.0 : static_cast<double>(rep.passed) / static_cast<double>(rep.total);
  if (opts.final_state) *opts.final_state = c.engine().state();
  c.save_snapshot();
  return rep;
}

ScenarioScript generate_load(int n_policies, int n_users, int n_devices, std::uint64_t seed) {
  if (n_policies < 1 || n_users < 1 || n_devices < 1) throw Error("bad_parameters", "parameters must be at least 1");
  // the evaluation home: a thermostat, 4 lights, a lock, a camera, 10 sensors
  static const std::vector<DeviceKind> roster{
      DeviceKind::Thermostat, DeviceKind::Light,  DeviceKind::Light,  DeviceKind::Light,  DeviceKind::Light,
      DeviceKind::Lock,       DeviceKind::Camera, DeviceKind::Sensor, DeviceKind::Sensor, DeviceKind::Sensor,
      DeviceKind::Sensor,     DeviceKind::Sensor, DeviceKind::Sensor, DeviceKind::Sensor, DeviceKind::Sensor,
      DeviceKind::Sensor,     DeviceKind::Sensor};
  std::mt19937_64 rng(seed);
  auto pick = [&](std::uint64_t n) { return static_cast<std::int64_t>(rng() % n); };

  ScenarioScript s;
  s.name = "load-p" + std::to_string(n_policies) + "-u" + std::to_string(n_users) + "-d" + std::to_string(n_devices) +
           "-s" + std::to_string(seed);
  s.description = "synthetic latency workload";
  std::map<DeviceKind, int> seen;
  std::vector<DeviceDescriptor> actuators;
  for (int i = 0; i < n_devices; ++i) {
    const auto kind = roster[static_cast<std::size_t>(i) % roster.size()];
    auto d = make_device(std::string(to_string(kind)) + "_" + std::to_string(++seen[kind]), kind);
    if (kind != DeviceKind::Sensor) actuators.push_back(d);
    s.devices.push_back(d);
  }
  if (actuators.empty()) {
    // a sensors-only roster still needs something to govern
    s.devices.push_back(make_device("thermostat_x", DeviceKind::Thermostat));
    actuators.push_back(s.devices.back());
  }
  std::vector<UserId> users;
  for (int i = 1; i <= n_users; ++i) {
    const int cls = 1 + static_cast<int>(pick(3));
    users.push_back("user" + std::to_string(i));
    s.users.push_back({s.owner, users.back(), cls, false, std::nullopt, std::string(role_for_class(cls))});
  }

  auto window = [&] {
    const auto a = pick(24);
    const auto b = (a + 1 + pick(12)) % 24;
    auto h = [](std::int64_t x) {
      return std::to_string(x % 12 == 0 ? 12 : x % 12) + ":00" + (x < 12 ? "am" : "pm");
    };
    return "time in [" + h(a) + "-" + h(b) + "]";
  };
  for (int i = 0; i < n_policies; ++i) {
    const auto& owner = users[static_cast<std::size_t>(pick(static_cast<std::uint64_t>(users.size())))];
    const auto& dev = actuators[static_cast<std::size_t>(pick(actuators.size()))];
    std::string cond;
    if (dev.value_attribute) {
      const auto span = dev.value_attribute->hi - dev.value_attribute->lo;
      const auto lo = dev.value_attribute->lo + pick(static_cast<std::uint64_t>(span));
      const auto hi = std::min(dev.value_attribute->hi, lo + 3 + pick(static_cast<std::uint64_t>(span / 3)));
      cond = dev.value_attribute->name + " in [" + std::to_string(lo) + "-" + std::to_string(hi) + "]";
      if (pick(3) == 0) cond += ", " + window();
    } else {
      cond = window();
    }
    std::string clause;
    if (pick(8) == 0 && users.size() > 1) {
      auto target = users[static_cast<std::size_t>(pick(users.size()))];
      if (target == owner) target = users[(static_cast<std::size_t>(pick(users.size())) + 1) % users.size()];
      auto pos = cond.find(" in ");
      cond.replace(pos, 4, " notin ");
      clause = "restrict :: " + target + " : " + dev.id + " : " + cond + " ;";
    } else {
      clause = "demand :: ~ : " + dev.id + " : " + cond + " ;";
    }
    s.events.push_back({std::nullopt, "SubmitPolicy", json{{"text", "@" + owner + "\n" + clause + "\n"}}});
  }
  for (int i = 0; i < n_policies; ++i) {
    const auto& actor = users[static_cast<std::size_t>(pick(users.size()))];
    const auto& dev = actuators[static_cast<std::size_t>(pick(actuators.size()))];
    json cmd{{"actor", actor}, {"device", dev.id}};
    if (dev.value_attribute) {
      cmd["verb"] = "set_value";
      cmd["attribute"] = dev.value_attribute->name;
      cmd["value"] = dev.value_attribute->lo + pick(static_cast<std::uint64_t>(dev.value_attribute->hi - dev.value_attribute->lo + 1));
    } else {
      cmd["verb"] = "switch";
      cmd["on"] = pick(2) == 0;
    }
    s.events.push_back({std::nullopt, "Command", cmd});
    if (i % 10 == 9) s.events.push_back({std::nullopt, "AdvanceClock", json{{"to", (i + 1) * 360}}});
  }
  return s;
}

}  // namespace homeguard
