#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "homeguard/controller.hpp"

namespace homeguard {

/// One scripted step. `kind` is AddUser, RemoveUser, ResolveUser, AddDevice,
/// RemoveDevice, SubmitPolicy, Respond, Command, SetPresence or AdvanceClock;
/// `body` holds the remaining fields of the event object.
struct ScriptEvent {
  std::optional<Instant> at;
  std::string kind;
  json body = json::object();
};

struct Expectation {
  std::size_t event = 0;
  json expected = json::object();
};

struct ScenarioScript {
  std::string name;
  std::string description;
  UserId owner = "admin";
  std::vector<DeviceDescriptor> devices;
  std::vector<UserRecord> users;
  std::vector<ScriptEvent> events;
  std::vector<Expectation> expectations;
  std::optional<std::map<std::string, int>> declared_conflicts;
};

void to_json(json& j, const ScenarioScript& s);
/// Parses and validates. Throws Error("script_invalid").
ScenarioScript parse_script(const json& j);
ScenarioScript load_script(const std::filesystem::path& p);

struct ExpectationResult {
  std::optional<std::size_t> event;  // empty for the declared-count check
  json expected;
  json observed;
  bool passed = false;
  std::string message;
};

struct LatencyStats {
  std::size_t count = 0;
  double min_ms = 0;
  double mean_ms = 0;
  double max_ms = 0;

  void add(double ms);
};

struct RunReport {
  std::string name;
  std::vector<ExpectationResult> results;
  std::size_t passed = 0;
  std::size_t total = 0;
  double success_rate = 1.0;
  std::map<std::string, int> conflicts;
  LatencyStats decisions;
  LatencyStats negotiations;
  LatencyStats steps;  // every event, whatever its kind
  std::size_t events = 0;
};

void to_json(json& j, const LatencyStats& s);
void to_json(json& j, const RunReport& r);
/// The report document without wall-clock fields, for determinism checks.
json without_latency(const RunReport& r);

struct RunOptions {
  EngineConfig config;
  std::optional<std::filesystem::path> store_dir;  // logs the run there when set
  EngineState* final_state = nullptr;              // receives the end state when set
};

/// Plays the script through the controller. Throws Error("script_invalid")
/// when an event names a device or user that does not exist at that time.
RunReport run(const ScenarioScript& script, const RunOptions& opts = {});

/// Seeded synthetic script for latency scaling. Device kinds cycle through the
/// evaluation roster when `n_devices` exceeds it.
ScenarioScript generate_load(int n_policies, int n_users, int n_devices, std::uint64_t seed);

}  // namespace homeguard
