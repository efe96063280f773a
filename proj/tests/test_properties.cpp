#include "doctest.h"

#include "suites.hpp"

using namespace homeguard;

namespace {

const std::filesystem::path kFixtures = HOMEGUARD_FIXTURES;

// a small universe keeps the bitmap exhaustive
constexpr std::int64_t kLo = -20, kHi = 20;

std::vector<bool> bits(const IntervalSet& s) {
  std::vector<bool> out;
  for (auto v = kLo; v <= kHi; ++v) out.push_back(s.contains(v));
  return out;
}

IntervalSet random_set(gen::Rng& rng) {
  std::vector<Interval> parts;
  for (int k = 0, n = static_cast<int>(rng.below(4)); k < n; ++k) {
    const auto a = rng.between(kLo, kHi);
    parts.push_back({a, a + rng.between(-1, 8)});  // -1 yields an empty piece that must vanish
  }
  return IntervalSet(parts);
}

void report(const suites::Outcome& o) {
  INFO(o.detail);
  CHECK(o.ok);
  CHECK(o.cases > 0);
}

}  // namespace

TEST_CASE("interval sets behave as integer sets") {
  gen::Rng rng(7);
  const auto universe = IntervalSet::single(kLo, kHi);
  for (int n = 0; n < 500; ++n) {
    const auto a = random_set(rng).intersect(universe), b = random_set(rng).intersect(universe);
    const auto ba = bits(a), bb = bits(b);
    std::vector<bool> inter, uni, comp;
    std::uint64_t card = 0;
    for (std::size_t k = 0; k < ba.size(); ++k) {
      inter.push_back(ba[k] && bb[k]);
      uni.push_back(ba[k] || bb[k]);
      comp.push_back(!ba[k]);
      card += ba[k];
    }
    CHECK(bits(a.intersect(b)) == inter);
    CHECK(bits(a.unite(b)) == uni);
    CHECK(bits(a.complement(universe)) == comp);
    CHECK(a.cardinality() == card);
    CHECK(a.overlaps(b) == (std::find(inter.begin(), inter.end(), true) != inter.end()));
    CHECK(a.subset_of(b) == (inter == ba));
    // canonical form: equal sets are equal values
    CHECK(a.unite(b) == b.unite(a));
    for (std::size_t k = 1; k < a.parts().size(); ++k) CHECK(a.parts()[k - 1].hi + 1 < a.parts()[k].lo);
  }
}

TEST_CASE("interval set edge cases") {
  CHECK(IntervalSet{{1, 3}, {4, 6}} == IntervalSet::single(1, 6));
  CHECK(IntervalSet{{5, 4}}.empty());
  CHECK(IntervalSet::single(60, 70).complement(IntervalSet::single(50, 90)) == IntervalSet({{50, 59}, {71, 90}}));
  CHECK(IntervalSet{}.complement(IntervalSet::single(0, 1)) == IntervalSet::single(0, 1));
  CHECK(IntervalSet::single(0, 9).cardinality() == 10);
  CHECK_FALSE(IntervalSet::single(0, 3).overlaps(IntervalSet::single(4, 9)));
}

TEST_CASE("condition regions match a membership scan") {
  gen::Rng rng(11);
  const auto domains = DomainCatalog::defaults();
  for (int n = 0; n < 300; ++n) {
    const auto c = gen::clause(rng, 1);
    for (const auto& cond : c.conditions) {
      CAPTURE(describe(c));
      CHECK(oracle::region_of(allowed_region(c, cond.key(), domains).region, cond.key()) ==
            oracle::region(c, cond.key()));
    }
  }
}

TEST_CASE("clock windows wrap midnight and cover the day when equal") {
  CHECK(clock_region({{19 * 60, 7 * 60}}) == IntervalSet({{0, 7 * 60 - 1}, {19 * 60, 1439}}));
  CHECK(clock_region({{6 * 60, 21 * 60}}) == IntervalSet::single(360, 1259));
  CHECK(clock_region({{300, 300}}) == DomainCatalog::time_domain());
  CHECK(parse_clock("12:00am") == 0);
  CHECK(parse_clock("12:30pm") == 750);
  CHECK(format_clock(19 * 60) == "7:00pm");
  CHECK_THROWS_AS(parse_clock("13:00pm"), Error);
}

TEST_CASE("classifier agrees with the brute-force oracle") { report(suites::classify_vs_oracle(1000, 2024)); }

TEST_CASE("classifier is symmetric and puts restrictions first") {
  gen::Rng rng(99);
  for (int n = 0; n < 400; ++n) {
    const auto t = gen::table(rng);
    const auto a = gen::clause(rng, 1), b = gen::clause(rng, 2);
    const auto ab = examine(a, b, t), ba = examine(b, a, t);
    REQUIRE(ab.has_value() == ba.has_value());
    if (!ab) continue;
    CHECK(ab->cls == ba->cls);
    if (ab->cls == ConflictClass::RC) {
      CHECK(ab->i == ba->i);
      const auto& first = ab->i == a.id ? a : b;
      CHECK(first.action == Action::Restrict);
    } else {
      CHECK(ab->i == a.id);
      CHECK(ba->i == b.id);
    }
  }
}

TEST_CASE("named conflict pairs classify as expected") {
  PriorityTable t;
  t.put("alice", UserEntry{1});
  t.put("bob", UserEntry{2});
  t.put("carol", UserEntry{1});
  auto thermo = [](const std::string& owner, Action act, std::int64_t lo, std::int64_t hi) {
    PolicyClause c;
    c.owners = {owner};
    c.device = "thermostat_1";
    c.action = act;
    c.conditions.insert({"temperature", "", NumericRange{IntervalSet::single(lo, hi), false}});
    return c;
  };
  CHECK(classify(thermo("alice", Action::Demand, 60, 70), thermo("bob", Action::Demand, 75, 80), t) ==
        ConflictClass::HPC);
  CHECK(classify(thermo("alice", Action::Demand, 60, 70), thermo("bob", Action::Demand, 65, 75), t) ==
        ConflictClass::SPC);
  CHECK(classify(thermo("alice", Action::Demand, 60, 70), thermo("carol", Action::Demand, 75, 80), t) ==
        ConflictClass::HCC);
  CHECK(classify(thermo("alice", Action::Demand, 60, 70), thermo("carol", Action::Demand, 65, 75), t) ==
        ConflictClass::SCC);
  CHECK(classify(thermo("bob", Action::Demand, 60, 70), thermo("alice", Action::Restrict, 62, 64), t) ==
        ConflictClass::RC);
  // identical clauses from one author are not a dispute
  CHECK(classify(thermo("alice", Action::Demand, 60, 70), thermo("alice", Action::Demand, 75, 80), t) ==
        ConflictClass::None);
  auto other = thermo("bob", Action::Demand, 60, 70);
  other.device = "thermostat_2";
  CHECK(classify(thermo("alice", Action::Demand, 75, 80), other, t) == ConflictClass::None);
}

TEST_CASE("soft merges keep exactly the oracle region") { report(suites::merge_property(200, 77)); }

TEST_CASE("merging a clause with itself changes nothing") {
  gen::Rng rng(5);
  for (int n = 0; n < 100; ++n) {
    const auto c = gen::clause(rng, 1);
    auto twin = c;
    twin.id = ClauseId{2};
    twin.owners = {c.owner() == "ann" ? "ben" : "ann"};
    try {
      const auto m = merge_soft(c, twin);
      for (const auto& cond : c.conditions) CHECK(oracle::region(m, cond.key()) == oracle::region(c, cond.key()));
    } catch (const Error& e) {
      // only an unsatisfiable clause merges to nothing
      CHECK(e.code() == "empty_merge");
    }
  }
}

TEST_CASE("parser round-trips the sample and generated clauses") {
  report(suites::parser_roundtrip(kFixtures / "policies" / "sample.policy", 100, 31337));
}

TEST_CASE("parsing reports positions and keeps going") {
  auto r = parse_policy_set({suites::slurp(kFixtures / "policies" / "broken.policy"), "broken.policy"});
  CHECK(r.diagnostics.size() == 2);
  for (const auto& d : r.diagnostics) CHECK(d.line > 0);
  auto inverted = parse_policy_set({"@a\ndemand :: ~ : thermostat_1 : temperature in [70-60] ;\n"});
  CHECK_FALSE(inverted.ok());
  CHECK(parse_policy_set({""}).clauses.empty());
  CHECK(parse_policy_set({""}).ok());
}

TEST_CASE("sample clauses parse to the expected shapes") {
  auto r = parse_policy_set({suites::slurp(kFixtures / "policies" / "sample.policy"), "sample.policy"});
  REQUIRE(r.ok());
  REQUIRE(r.clauses.size() == 8);
  const auto& first = r.clauses[0];
  CHECK(first.owner == "U1");
  CHECK(first.action == ClauseAction::Restrict);
  CHECK(first.targets.empty());
  CHECK(render_clause(first) == "restrict :: ~ : thermostat_1 : temperature notin [60-70] ;");
  const auto& wrap = r.clauses[6];
  CHECK(wrap.owner == "U2");
  REQUIRE(wrap.conditions.size() == 1);
  CHECK(std::get<ClockItems>(wrap.conditions[0].value) == ClockItems{{19 * 60, 7 * 60}});
  CHECK(r.clauses[7].devices == std::vector<DeviceId>{"lock_1", "lock_4"});
  CHECK(render_clause(r.clauses[3]).find(": ~ ;") != std::string::npos);
}

TEST_CASE("priority rules") { report(suites::priority_rules()); }

TEST_CASE("add_user never assigns above the commander") {
  gen::Rng rng(3);
  for (int n = 0; n < 300; ++n) {
    auto t = suites::seeded_table();
    const auto cmdr = gen::Rng(n).pick(std::vector<std::string>{"owner", "alice", "gary", "pat", "quinn"});
    const int cls = static_cast<int>(rng.below(5));
    const bool perm = rng.chance(50);
    try {
      auto r = add_user({cmdr, "newbie", cls, perm, std::nullopt, ""}, t, 0);
      CHECK(r.table.class_of("newbie") >= t.class_of(cmdr));
      if (perm) CHECK(t.at(cmdr).device_perm);
    } catch (const Error& e) {
      CHECK((cls < t.class_of(cmdr) || (perm && !t.at(cmdr).device_perm)));
    }
  }
}

TEST_CASE("outranks is a strict order on classes") {
  gen::Rng rng(8);
  for (int n = 0; n < 50; ++n) {
    const auto t = gen::table(rng);
    for (const auto& a : gen::roster())
      for (const auto& b : gen::roster()) {
        CHECK(outranks(a, b, t) == (t.class_of(a) < t.class_of(b)));
        for (const auto& c : gen::roster())
          if (outranks(a, b, t) && outranks(b, c, t)) CHECK(outranks(a, c, t));
      }
  }
}

TEST_CASE("enforcement agrees with the rule-text oracle") { report(suites::enforcement_vs_oracle(300, 4242)); }

TEST_CASE("structural commands and app installs are gated by permission and class") {
  PriorityTable t = suites::seeded_table();
  t = add_user({"owner", "kid", 3, false, std::nullopt, ""}, t, 0).table;
  DeviceRoster devs{{"lock_1", make_device("lock_1", DeviceKind::Lock)}};
  auto decide = [&](const UserId& who, Verb v, const DeviceId& dev = "lock_1") {
    return authorize({who, dev, std::move(v), 0, std::nullopt}, RuleTable{}, t, {}, 0, devs);
  };
  CHECK(decide("pat", SetCode{}).threat == ThreatTag::T3);
  CHECK(decide("quinn", SetCode{}).allowed());
  CHECK(decide("pat", RemoveDevice{}).threat == ThreatTag::T3);
  CHECK(decide("pat", AddDevice{DeviceKind::Light}, "light_9").threat == ThreatTag::T3);
  CHECK(decide("pat", InstallApp{"x", {}}, "").allowed());
  CHECK(decide("gary", InstallApp{"x", {}}, "").threat == ThreatTag::T2);
  CHECK(decide("kid", InstallApp{"x", {}}, "").threat == ThreatTag::T2);
  CHECK(decide("stranger", Switch{true}).threat == ThreatTag::T4);
  CHECK_THROWS_AS(decide("pat", Switch{true}, "oven_1"), Error);
}

TEST_CASE("denials for temporary users on timed rules are unauthorized access") {
  DenialContext ctx{DenialReason::Restricted, true, true};
  DeviceCommand cmd{"gary", "lock_1", Switch{false}, 0, std::nullopt};
  CHECK(detect_threat_class(cmd, Decision::Verdict::Deny, ctx) == ThreatTag::T4);
  ctx.time_bound = false;
  CHECK(detect_threat_class(cmd, Decision::Verdict::Deny, ctx) == ThreatTag::T1);
  ctx.actor_temporary = false;
  ctx.time_bound = true;
  CHECK(detect_threat_class(cmd, Decision::Verdict::Deny, ctx) == ThreatTag::T1);
  CHECK_FALSE(detect_threat_class(cmd, Decision::Verdict::Allow, ctx).has_value());
  ctx.reason = DenialReason::PendingResolution;
  CHECK_FALSE(detect_threat_class(cmd, Decision::Verdict::Deny, ctx).has_value());
}

TEST_CASE("rules mirror their clauses") {
  auto r = parse_policy_set({"@alice\ndemand :: ~ : thermostat_1 : temperature in [60-70] ;\n"
                             "restrict :: bob : thermostat_1 : temperature notin [62-66] ;\n"});
  REQUIRE(r.ok());
  PriorityTable t;
  t.put("alice", UserEntry{1});
  t.put("bob", UserEntry{2});
  ClauseIdAllocator ids;
  std::vector<PolicyClause> clauses;
  for (const auto& a : r.clauses)
    for (auto& c : normalize(a, 0, t, ids)) clauses.push_back(c);
  const auto table = rebuild_table(clauses);
  REQUIRE(table.size() == 2);
  CHECK(table.rules()[0].effect == Effect::Permit);
  CHECK_FALSE(table.rules()[0].subject.has_value());
  CHECK(table.rules()[0].resource == "thermostat_1");
  CHECK(table.rules()[1].effect == Effect::Deny);
  auto hits = table.lookup("bob", "thermostat_1");
  REQUIRE(hits.size() == 2);
  CHECK(hits[0]->effect == Effect::Deny);
  CHECK(table.lookup("alice", "thermostat_1").size() == 1);
  CHECK(table.lookup("bob", "light_1").empty());
  CHECK(rebuild_table(clauses) == table);
}
