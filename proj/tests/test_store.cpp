#include "doctest.h"

#include <fstream>

#include "homeguard/controller.hpp"
#include "support.hpp"

using namespace homeguard;

namespace {

std::unique_ptr<EventStore> store_in(const testing::TempDir& d) { return std::make_unique<EventStore>(d.path()); }

void seed_home(Controller& c) {
  c.execute("Bootstrapped", {{"owner", "admin"}});
  c.execute("DeviceAdded", {{"device", {{"id", "thermostat_1"}, {"kind", "thermostat"}}}});
  c.execute("DeviceAdded", {{"device", {{"id", "light_1"}, {"kind", "light"}}}});
  c.execute("UserAdded", json(UserRecord{"admin", "alice", 2, false, std::nullopt, ""}));
  c.execute("UserAdded", json(UserRecord{"admin", "bob", 2, false, std::nullopt, ""}));
}

}  // namespace

TEST_CASE("appends get gapless increasing sequence numbers") {
  testing::TempDir dir;
  EventStore s(dir.path());
  CHECK(s.append({0, "Bootstrapped", 0, false, {{"owner", "a"}}, nullptr}) == 1);
  CHECK(s.append({0, "ClockAdvanced", 5, false, {{"to", 5}}, nullptr}) == 2);
  auto evs = s.events();
  REQUIRE(evs.size() == 2);
  CHECK(evs[0].seq == 1);
  CHECK(evs[1].seq == 2);
  EventStore reopened(dir.path());
  CHECK(reopened.last_seq() == 2);
  CHECK(reopened.append({0, "ClockAdvanced", 9, false, {{"to", 9}}, nullptr}) == 3);
}

TEST_CASE("log gaps and bad lines are reported with their position") {
  CHECK_THROWS_WITH_AS(parse_log("{\"seq\":1,\"type\":\"x\",\"at\":0}\n{\"seq\":3,\"type\":\"x\",\"at\":0}\n"),
                       doctest::Contains("line 2"), Error);
  CHECK_THROWS_WITH_AS(parse_log("{\"seq\":1,\"type\":\"x\",\"at\":0}\n{\"seq\":2,"), doctest::Contains("byte 28"),
                       Error);
  CHECK_THROWS_AS(parse_log("not json\n"), Error);
  CHECK(parse_log("").empty());
}

TEST_CASE("empty state round-trips") {
  EngineState s;
  CHECK(snapshot_document(parse_snapshot(snapshot_document(s))) == snapshot_document(s));
  CHECK(parse_snapshot(snapshot_document(s)) == s);
}

TEST_CASE("state with sixty policies round-trips") {
  Controller c;
  seed_home(c);
  for (int i = 0; i < 60; ++i) {
    const int lo = 50 + (i * 7) % 35;
    const std::string who = i % 2 ? "alice" : "bob";
    c.execute("PolicySubmitted",
              {{"text", "@" + who + "\ndemand :: ~ : light_1 : level in [" + std::to_string(i) + "-" +
                            std::to_string(i + 20) + "], time in [" + std::to_string(1 + i % 11) + ":00am-" +
                            std::to_string(1 + i % 11) + ":30pm] ;\n@" + who + "\nrestrict :: ~ : thermostat_1 : temperature notin [" +
                            std::to_string(lo) + "-" + std::to_string(lo + 4) + "] ;\n"}});
  }
  const auto& st = c.engine().state();
  CHECK(st.next_clause > 60);
  const auto doc = snapshot_document(st);
  const auto back = parse_snapshot(doc);
  CHECK(back == st);
  CHECK(snapshot_document(back) == doc);
}

TEST_CASE("truncated snapshot fails without partial state") {
  testing::TempDir dir;
  Controller c(EngineConfig{}, store_in(dir));
  seed_home(c);
  c.save_snapshot();
  const auto doc = read_file(dir.path() / "state.snapshot");
  {
    std::ofstream out(dir.path() / "state.snapshot", std::ios::trunc);
    out << doc.substr(0, doc.size() / 2);
  }
  EventStore s(dir.path());
  std::optional<EngineState> loaded;
  CHECK_THROWS_WITH_AS(loaded = s.load_snapshot(), doctest::Contains("byte"), Error);
  CHECK_FALSE(loaded.has_value());
}

TEST_CASE("replaying every prefix of the log rebuilds the live state") {
  testing::TempDir dir;
  Controller c(EngineConfig{}, store_in(dir));
  std::vector<std::string> snapshots;  // after each input event
  auto step = [&](const std::string& type, json p) {
    try {
      c.execute(type, std::move(p));
    } catch (const Error&) {
    }
    snapshots.push_back(snapshot_document(c.engine().state()));
  };
  step("Bootstrapped", {{"owner", "admin"}});
  step("DeviceAdded", {{"device", {{"id", "thermostat_1"}, {"kind", "thermostat"}}}});
  step("UserAdded", json(UserRecord{"admin", "alice", 2, false, std::nullopt, ""}));
  step("UserAdded", json(UserRecord{"admin", "bob", 2, false, std::nullopt, ""}));
  step("UserAdded", json(UserRecord{"bob", "mallory", 1, false, std::nullopt, ""}));
  step("UserAdded", json(UserRecord{"admin", "gary", 2, false, 3600, ""}));
  step("PolicySubmitted", {{"text", "@alice\ndemand :: ~ : thermostat_1 : temperature in [60-70] ;\n"}});
  step("PolicySubmitted", {{"text", "@bob\ndemand :: ~ : thermostat_1 : temperature in [75-80] ;\n"}});
  step("PolicySubmitted", {{"text", "@bob\ndemand :: ~ : nowhere : temperature in [75-80] ;\n"}});
  step("SessionResponded", {{"session", 1}, {"party", "alice"}, {"verdict", "accept"}});
  step("SessionResponded", {{"session", 1}, {"party", "alice"}, {"verdict", "accept"}});
  step("SessionResponded", {{"session", 1}, {"party", "bob"}, {"verdict", "accept"}});
  step("PresenceChanged", {{"user", "alice"}, {"presence", "Home"}});
  step("CommandDecided",
       {{"command", {{"actor", "bob"}, {"device", "thermostat_1"}, {"verb", "set_value"}, {"attribute", "temperature"},
                     {"value", 80}}}});
  step("ClockAdvanced", {{"to", 7200}});
  step("CommandDecided", {{"command", {{"actor", "gary"}, {"device", "thermostat_1"}, {"verb", "switch"}}}});

  const auto log = c.store()->events();
  std::vector<StoredEvent> prefix;
  std::size_t inputs = 0;
  for (const auto& e : log) {
    prefix.push_back(e);
    if (e.derived) continue;
    ++inputs;
    // the state after input k is complete once its derived records follow; replay ignores them anyway
    CHECK(snapshot_document(replay(prefix).state()) == snapshots[inputs - 1]);
  }
  CHECK(inputs == snapshots.size());
  auto reopened = Controller::open(EngineConfig{}, store_in(dir));
  CHECK(snapshot_document(reopened.engine().state()) == snapshots.back());
}

TEST_CASE("rejected requests are logged with their error") {
  testing::TempDir dir;
  Controller c(EngineConfig{}, store_in(dir));
  seed_home(c);
  CHECK_THROWS_AS(c.execute("PolicySubmitted", {{"text", "@alice\ndemand :: ~ thermostat_1 ;"}}), SubmitError);
  const auto log = c.store()->events();
  const auto& last = log.back();
  CHECK(last.type == "PolicySubmitted");
  CHECK(last.result.at("error") == "parse");
  CHECK(last.result.at("diagnostics").size() >= 1);
}
