// Operator entry point. Exit codes: 0 success, 1 expectation or parse
// failure, 2 usage error.

#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>

#include "CLI11.hpp"
#include "homeguard/service.hpp"
#include "homeguard/simulator.hpp"

using namespace homeguard;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

void emit(bool as_json, const json& doc, const std::string& human) {
  if (as_json) {
    std::cout << canonical(doc) << "\n";
  } else {
    std::cout << human;
  }
}

DeviceKind guess_kind(const DeviceId& id) {
  auto has = [&](const char* p) { return id.rfind(p, 0) == 0; };
  if (has("thermostat")) return DeviceKind::Thermostat;
  if (has("light") || has("bulb") || has("lamp")) return DeviceKind::Light;
  if (has("lock")) return DeviceKind::Lock;
  if (has("camera")) return DeviceKind::Camera;
  return DeviceKind::Sensor;
}

// "# users: alice=1, bob=2" lines give owner classes to an offline negotiation
std::map<UserId, int> roster_pragmas(const std::string& text) {
  std::map<UserId, int> out;
  std::istringstream in(text);
  std::string line;
  const std::regex pragma(R"(^\s*#\s*users\s*:(.*)$)");
  const std::regex entry(R"(([A-Za-z0-9_.\-]+)\s*=\s*(\d+))");
  while (std::getline(in, line)) {
    std::smatch m;
    if (!std::regex_match(line, m, pragma)) continue;
    const std::string rest = m[1];
    for (std::sregex_iterator it(rest.begin(), rest.end(), entry), end; it != end; ++it)
      out[(*it)[1]] = std::stoi((*it)[2]);
  }
  return out;
}

int cmd_parse(const std::string& file, bool as_json) {
  const auto text = read_file(file);
  const auto res = parse_policy_set(PolicySource{text, file});
  for (const auto& d : res.diagnostics) {
    if (as_json) {
      std::cout << canonical(json(d)) << "\n";
    } else {
      std::cout << d.format(file) << "\n";
    }
  }
  emit(as_json, json{{"file", file}, {"clauses", res.clauses.size()}, {"diagnostics", res.diagnostics.size()}},
       std::to_string(res.clauses.size()) + " clause(s), " + std::to_string(res.diagnostics.size()) +
           " diagnostic(s)\n");
  return res.ok() ? kOk : kFailed;
}

std::string step_line(const InstallStep& s) {
  const auto& o = s.outcome;
  std::string line = "#" + std::to_string(to_underlying(s.report.i)) + " x #" +
                     std::to_string(to_underlying(s.report.j)) + " " + std::string(to_string(s.report.cls)) + " → ";
  auto owners = [](const PolicyClause& c) {
    std::string out;
    for (const auto& u : c.owners) out += (out.empty() ? "" : ", ") + u;
    return out;
  };
  switch (o.kind) {
    case NegotiationOutcome::Kind::Resolved:
      line += o.clause ? "clause of " + owners(*o.clause) : "resolved";
      break;
    case NegotiationOutcome::Kind::Proposal: {
      std::string parties;
      for (const auto& p : o.parties) parties += (parties.empty() ? "" : ", ") + p;
      line += "proposal to " + parties + (o.clause ? ": " + render_clause(clause_to_ast(*o.clause)) : "");
      break;
    }
    case NegotiationOutcome::Kind::Escalated:
      line += "escalated to " + o.escalated_to;
      break;
  }
  return line;
}

int cmd_negotiate(const std::string& file, const std::vector<std::string>& user_flags, bool as_json) {
  const auto text = read_file(file);
  auto parsed = parse_policy_set(PolicySource{text, file});
  if (!parsed.ok()) {
    for (const auto& d : parsed.diagnostics) std::cerr << d.format(file) << "\n";
    return kFailed;
  }
  auto roster = roster_pragmas(text);
  for (const auto& f : user_flags) {
    const auto eq = f.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--user", "expected name=class, got '" + f + "'");
    roster[f.substr(0, eq)] = std::stoi(f.substr(eq + 1));
  }
  for (const auto& c : parsed.clauses)
    if (!roster.count(c.owner)) roster[c.owner] = 1;  // unnamed owners default to adults

  Engine e;
  UserId owner = "admin";
  for (const auto& [u, cls] : roster)
    if (cls == 0) {
      owner = u;
      break;
    }
  e.bootstrap(owner);
  for (const auto& [u, cls] : roster) {
    if (u == owner) continue;
    auto rep = e.add_user({owner, u, cls, false, std::nullopt, std::string(role_for_class(cls))});
    if (!rep.ok) throw Error(rep.error, rep.message);
  }
  std::set<DeviceId> devices;
  for (const auto& c : parsed.clauses) devices.insert(c.devices.begin(), c.devices.end());
  for (const auto& d : devices) e.register_device(make_device(d, guess_kind(d)));

  const auto rep = e.submit_clauses(parsed.clauses);
  if (as_json) {
    for (const auto& s : rep.steps) std::cout << canonical(json(s)) << "\n";
    std::cout << canonical(json{{"rules", e.policies()}, {"sessions", rep.sessions.size()}}) << "\n";
    return kOk;
  }
  std::cout << "conflicts: " << rep.steps.size() << "\n";
  for (const auto& s : rep.steps) std::cout << "  " << step_line(s) << "\n";
  std::cout << "rule table:\n";
  for (const auto& c : e.policies()) std::cout << "  " << describe(c) << "\n";
  for (const auto& [id, s] : e.state().sessions)
    if (!s.terminal()) std::cout << "open session " << to_underlying(id) << ": " << describe(s.proposed) << "\n";
  return kOk;
}

std::string human_report(const RunReport& r) {
  std::ostringstream out;
  out << "scenario " << r.name << ": " << r.passed << "/" << r.total << " expectations passed, success "
      << r.success_rate * 100 << "%\n";
  for (const auto& x : r.results) {
    out << "  [" << (x.passed ? "pass" : "FAIL") << "] "
        << (x.event ? "event " + std::to_string(*x.event) : std::string("declared counts")) << ": "
        << (x.passed ? x.expected.dump() : x.message) << "\n";
  }
  out << "  conflicts:";
  if (r.conflicts.empty()) out << " none";
  for (const auto& [k, v] : r.conflicts) out << " " << k << "=" << v;
  out << "\n";
  auto lat = [&](const char* label, const LatencyStats& s) {
    out << "  " << label << ": n=" << s.count << " min=" << s.min_ms << "ms mean=" << s.mean_ms << "ms max=" << s.max_ms
        << "ms\n";
  };
  lat("decision latency", r.decisions);
  lat("negotiation latency", r.negotiations);
  return out.str();
}

int cmd_run(const std::string& file, const std::string& report_out, const std::string& store_dir, bool as_json) {
  const auto script = load_script(file);
  RunOptions opts;
  if (!store_dir.empty()) opts.store_dir = store_dir;
  const auto rep = run(script, opts);
  if (!report_out.empty()) {
    std::ofstream out(report_out);
    out << json(rep).dump(2) << "\n";
    if (!out) throw Error("storage_unavailable", "cannot write " + report_out);
  }
  emit(as_json, json(rep), human_report(rep));
  return rep.passed == rep.total ? kOk : kFailed;
}

EngineState load_state(const std::string& store_dir, const std::string& snapshot) {
  if (!snapshot.empty()) return parse_snapshot(read_file(snapshot));
  if (!store_dir.empty()) {
    EventStore s(store_dir);
    return replay(s.events()).state();
  }
  return {};
}

int cmd_check(const std::string& doc, const std::string& store_dir, const std::string& snapshot, bool as_json) {
  const std::string text = std::filesystem::exists(doc) ? read_file(doc) : doc;
  const auto cmd = json::parse(text).get<DeviceCommand>();
  Engine e;
  e.restore(load_state(store_dir, snapshot));
  const auto& st = e.state();
  const auto d = authorize(cmd, e.rules(), st.priorities, st.presence, st.now, st.devices);
  std::string human = std::string(to_string(d.verdict));
  if (d.threat) human += " " + std::string(to_string(*d.threat));
  if (!d.allowed()) human += " (" + d.detail + ")";
  human += "\n";
  for (const auto& n : d.notifications) human += "  notify " + n.recipient + ": " + n.message + "\n";
  emit(as_json, json(d), human);
  return kOk;
}

int cmd_report(const std::string& store_dir, bool as_json) {
  EventStore s(store_dir);
  const auto events = s.events();
  std::map<std::string, int> inputs, derived, threats, conflicts, verdicts;
  for (const auto& e : events) {
    (e.derived ? derived : inputs)[e.type]++;
    if (e.derived) continue;
    if (e.result.is_object() && e.result.contains("threat") && !e.result.at("threat").is_null())
      threats[e.result.at("threat").get<std::string>()]++;
    if (e.type == "CommandDecided" && e.result.is_object() && e.result.contains("verdict"))
      verdicts[e.result.at("verdict").get<std::string>()]++;
    if (e.result.is_object() && e.result.contains("steps"))
      for (const auto& st : e.result.at("steps")) conflicts[st.at("conflict").at("class").get<std::string>()]++;
  }
  const auto engine = replay(events);
  const auto& st = engine.state();
  std::map<std::string, int> sessions;
  for (const auto& [_, x] : st.sessions) sessions[std::string(to_string(x.state))]++;
  const json doc{{"events", events.size()},
                 {"inputs", inputs},
                 {"derived", derived},
                 {"threats", threats},
                 {"verdicts", verdicts},
                 {"conflicts", conflicts},
                 {"sessions", sessions},
                 {"users", st.priorities.entries().size()},
                 {"rules", st.active.size()},
                 {"notifications", st.notifications.size()},
                 {"now", st.now}};
  std::ostringstream h;
  h << "events: " << events.size() << "  users: " << st.priorities.entries().size() << "  rules: " << st.active.size()
    << "  notifications: " << st.notifications.size() << "\n";
  auto line = [&](const char* label, const std::map<std::string, int>& m) {
    h << label << ":";
    if (m.empty()) h << " none";
    for (const auto& [k, v] : m) h << " " << k << "=" << v;
    h << "\n";
  };
  line("inputs", inputs);
  line("verdicts", verdicts);
  line("threats", threats);
  line("conflicts", conflicts);
  line("sessions", sessions);
  emit(as_json, doc, h.str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"homeguard: multi-user smart-home access control"};
  app.require_subcommand(1);
  app.fallthrough();
  bool as_json = false;
  app.add_flag("--json", as_json, "one canonical JSON document per line");

  std::optional<std::string> addr, store_flag;
  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP service");
  serve_cmd->add_option("--addr", addr, "bind address host:port (env ADDR)");
  serve_cmd->add_option("--store-dir", store_flag, "directory for events.log and state.snapshot (env STORE_DIR)");

  std::string file;
  auto* parse_cmd = app.add_subcommand("parse", "lint a policy file");
  parse_cmd->add_option("file", file, "policy file")->required()->check(CLI::ExistingFile);

  std::vector<std::string> users;
  auto* neg_cmd = app.add_subcommand("negotiate", "detect and negotiate conflicts in a policy file offline");
  neg_cmd->add_option("file", file, "policy file")->required()->check(CLI::ExistingFile);
  neg_cmd->add_option("--user", users, "owner class as name=class (repeatable)");

  std::string report_out, store_dir, snapshot;
  auto* run_cmd = app.add_subcommand("run-scenario", "replay a scenario script and check its expectations");
  run_cmd->add_option("file", file, "scenario script")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--report", report_out, "also write the report document here");
  run_cmd->add_option("--store-dir", store_dir, "log the run to this store");

  std::string command_doc;
  auto* check_cmd = app.add_subcommand("check", "authorize one command document against a stored state");
  check_cmd->add_option("command", command_doc, "command document, inline JSON or a file")->required();
  check_cmd->add_option("--store-dir", store_dir, "replay this store first");
  check_cmd->add_option("--snapshot", snapshot, "load this state.snapshot first");

  auto* report_cmd = app.add_subcommand("report", "summarize a store");
  report_cmd->add_option("--store-dir", store_dir, "store to summarize")->required()->check(CLI::ExistingDirectory);

  int n_policies = 5, n_users = 3, n_devices = 17;
  std::uint64_t seed = 1;
  auto* gen_cmd = app.add_subcommand("generate-load", "print a seeded synthetic scenario script");
  gen_cmd->add_option("--policies", n_policies)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--users", n_users)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--devices", n_devices)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kUsage;
  }

  try {
    if (*serve_cmd) {
      const auto opts = resolve_serve_options(addr, store_flag);
      std::cerr << "serving on " << opts.addr << " with store " << opts.store_dir << "\n";
      return serve(opts, std::make_shared<SystemClock>(), [](int port) { std::cerr << "listening on port " << port << "\n"; });
    }
    if (*parse_cmd) return cmd_parse(file, as_json);
    if (*neg_cmd) return cmd_negotiate(file, users, as_json);
    if (*run_cmd) return cmd_run(file, report_out, store_dir, as_json);
    if (*check_cmd) return cmd_check(command_doc, store_dir, snapshot, as_json);
    if (*report_cmd) return cmd_report(store_dir, as_json);
    if (*gen_cmd) {
      std::cout << json(generate_load(n_policies, n_users, n_devices, seed)).dump(2) << "\n";
      return kOk;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << "\n";
    return kFailed;
  } catch (const json::exception& e) {
    std::cerr << "error: bad_document: " << e.what() << "\n";
    return kFailed;
  }
  return kUsage;
}
