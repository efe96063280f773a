#include "doctest.h"

#include <filesystem>
#include <set>

#include "homeguard/simulator.hpp"
#include "support.hpp"

using namespace homeguard;
namespace fs = std::filesystem;

namespace {

std::vector<fs::path> scripts() {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(fs::path(HOMEGUARD_FIXTURES) / "scenarios"))
    if (e.path().extension() == ".scn") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

json minimal_script() {
  return json{{"name", "tiny"},
              {"devices", json::array({{{"id", "thermostat_1"}, {"kind", "thermostat"}}})},
              {"users", json::array({json(UserRecord{"admin", "alice", 1, false, std::nullopt, ""})})},
              {"events", json::array()},
              {"expectations", json::array()}};
}

}  // namespace

TEST_CASE("every shipped scenario meets its expectations") {
  const auto all = scripts();
  REQUIRE(all.size() >= 19);
  for (const auto& p : all) {
    CAPTURE(p.filename().string());
    auto rep = run(load_script(p));
    for (const auto& r : rep.results) {
      CAPTURE(r.message);
      CHECK(r.passed);
    }
    CHECK(rep.passed == rep.total);
    CHECK(rep.success_rate == 1.0);
  }
}

TEST_CASE("threat scripts deny ten occurrences with the matching tag") {
  for (int t = 1; t <= 5; ++t) {
    const auto tag = "T" + std::to_string(t);
    auto s = load_script(fs::path(HOMEGUARD_FIXTURES) / "scenarios" / ("threat" + std::to_string(t) + ".scn"));
    int tagged = 0;
    for (const auto& x : s.expectations)
      if (x.expected.value("threat", "") == tag) ++tagged;
    CHECK_MESSAGE(tagged == 10, tag);
  }
}

TEST_CASE("an empty script succeeds trivially") {
  auto rep = run(parse_script(minimal_script()));
  CHECK(rep.total == 0);
  CHECK(rep.success_rate == 1.0);
  CHECK(rep.conflicts.empty());
}

TEST_CASE("scripts round-trip through their document form") {
  for (const auto& p : scripts()) {
    auto s = load_script(p);
    CHECK(json(parse_script(json(s))) == json(s));
  }
}

TEST_CASE("malformed scripts are rejected before running") {
  auto bad_kind = minimal_script();
  bad_kind["events"] = json::array({{{"event", "Teleport"}}});
  CHECK_THROWS_WITH_AS(parse_script(bad_kind), doctest::Contains("unknown event kind"), Error);

  auto backwards = minimal_script();
  backwards["events"] = json::array({{{"event", "AdvanceClock"}, {"at", 100}}, {{"event", "AdvanceClock"}, {"at", 50}}});
  CHECK_THROWS_AS(parse_script(backwards), Error);

  auto dangling = minimal_script();
  dangling["expectations"] = json::array({{{"event", 3}, {"verdict", "allow"}}});
  CHECK_THROWS_WITH_AS(parse_script(dangling), doctest::Contains("does not exist"), Error);

  auto unknown_key = minimal_script();
  unknown_key["events"] = json::array({{{"event", "AdvanceClock"}, {"at", 10}}});
  unknown_key["expectations"] = json::array({{{"event", 0}, {"vibe", "good"}}});
  CHECK_THROWS_WITH_AS(parse_script(unknown_key), doctest::Contains("unknown expectation key"), Error);

  auto ghost = minimal_script();
  ghost["events"] = json::array(
      {{{"event", "Command"}, {"actor", "alice"}, {"device", "oven_9"}, {"verb", "switch"}, {"on", true}}});
  auto s = parse_script(ghost);
  try {
    run(s);
    FAIL("expected script_invalid");
  } catch (const Error& e) {
    CHECK(e.code() == "script_invalid");
    CHECK(std::string(e.what()).find("event 0") != std::string::npos);
  }
}

TEST_CASE("a failed expectation lowers the success rate") {
  auto doc = minimal_script();
  doc["events"] = json::array({{{"event", "Command"},
                                {"actor", "alice"},
                                {"device", "thermostat_1"},
                                {"verb", "set_value"},
                                {"attribute", "temperature"},
                                {"value", 70}}});
  doc["expectations"] = json::array({{{"event", 0}, {"verdict", "deny"}}, {{"event", 0}, {"verdict", "allow"}}});
  auto rep = run(parse_script(doc));
  CHECK(rep.total == 2);
  CHECK(rep.passed == 1);
  CHECK(rep.success_rate == doctest::Approx(0.5));
  CHECK_FALSE(rep.results[0].passed);
  CHECK(rep.results[0].observed.at("verdict") == "allow");
}

TEST_CASE("generated load is a pure function of its seed") {
  auto a = generate_load(20, 4, 9, 42);
  auto b = generate_load(20, 4, 9, 42);
  auto c = generate_load(20, 4, 9, 43);
  CHECK(json(a) == json(b));
  CHECK(json(a) != json(c));
  CHECK(without_latency(run(a)) == without_latency(run(b)));
}

TEST_CASE("generated rosters cycle device kinds past seventeen") {
  auto s = generate_load(5, 2, 40, 1);
  CHECK(s.devices.size() == 40);
  std::map<DeviceKind, int> kinds;
  for (const auto& d : s.devices) ++kinds[d.kind];
  CHECK(kinds[DeviceKind::Thermostat] == 3);
  // two full rosters, then thermostat, four lights and the lock
  CHECK(kinds[DeviceKind::Light] == 4 * 3);
  CHECK(kinds[DeviceKind::Lock] == 3);
  CHECK(kinds[DeviceKind::Camera] == 2);
  CHECK(kinds[DeviceKind::Sensor] == 10 * 2);
  std::set<std::string> ids;
  for (const auto& d : s.devices) ids.insert(d.id);
  CHECK(ids.size() == 40);
  CHECK_THROWS_AS(generate_load(0, 1, 1, 1), Error);
}

TEST_CASE("a logged run replays to the same end state and report") {
  for (const char* name : {"same_device.scn", "temporary_users.scn", "threat5.scn"}) {
    CAPTURE(name);
    testing::TempDir dir;
    auto script = load_script(fs::path(HOMEGUARD_FIXTURES) / "scenarios" / name);
    EngineState live;
    RunOptions opts;
    opts.store_dir = dir.path();
    opts.final_state = &live;
    auto first = run(script, opts);

    auto replayed = replay(EventStore(dir.path()).events(), {});
    CHECK(snapshot_document(replayed.state()) == snapshot_document(live));
    CHECK(without_latency(run(script)) == without_latency(first));
  }
}
