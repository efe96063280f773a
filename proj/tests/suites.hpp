#pragma once

// Checks shared by the unit tests and the acceptance runner. Each returns
// a verdict plus a line of detail naming the first counterexample.

#include <filesystem>
#include <functional>
#include <fstream>
#include <sstream>

#include "homeguard/enforcement.hpp"
#include "homeguard/negotiation.hpp"
#include "homeguard/store.hpp"
#include "oracle.hpp"

namespace suites {

using namespace homeguard;

struct Outcome {
  bool ok = true;
  std::string detail;
  std::size_t cases = 0;

  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

inline Outcome classify_vs_oracle(std::size_t pairs, std::uint64_t seed) {
  Outcome out;
  gen::Rng rng(seed);
  std::map<ConflictClass, int> seen;
  for (std::size_t n = 0; n < pairs; ++n) {
    const auto table = gen::table(rng);
    const auto a = gen::clause(rng, 1), b = gen::clause(rng, 2);
    const auto want = oracle::classify(a, b, table, gen::roster());
    const auto got = classify(a, b, table);
    ++seen[got];
    ++out.cases;
    if (got != want)
      out.fail("pair " + std::to_string(n) + ": " + describe(a) + " | " + describe(b) + " gave " +
               std::string(to_string(got)) + ", oracle " + std::string(to_string(want)));
  }
  if (out.ok) {
    for (const auto& [c, k] : seen) out.detail += std::string(to_string(c)) + "=" + std::to_string(k) + " ";
  }
  return out;
}

/// Every key either clause mentions, each compared against the bitmap oracle.
inline Outcome merge_property(std::size_t pairs, std::uint64_t seed) {
  Outcome out;
  gen::Rng rng(seed);
  std::size_t guard = 0;
  while (out.cases < pairs && guard++ < pairs * 200) {
    const auto table = gen::table(rng);
    const auto a = gen::clause(rng, 1, "thermostat_1"), b = gen::clause(rng, 2, "thermostat_1");
    const auto cls = oracle::classify(a, b, table, gen::roster());
    if (cls != ConflictClass::SPC && cls != ConflictClass::SCC) continue;
    ++out.cases;
    std::set<std::string> keys;
    for (const auto& c : a.conditions) keys.insert(c.key());
    for (const auto& c : b.conditions) keys.insert(c.key());
    bool expect_empty = false;
    for (const auto& k : keys) {
      const auto r = oracle::merged_region(a, b, k);
      expect_empty = expect_empty || std::none_of(r.begin(), r.end(), [](bool x) { return x; });
    }
    try {
      const auto m = merge_soft(a, b);
      if (expect_empty) out.fail("case " + std::to_string(out.cases) + ": merge of " + describe(a) + " | " + describe(b) +
                                 " should be empty, got " + describe(m));
      for (const auto& k : keys)
        if (oracle::region(m, k) != oracle::merged_region(a, b, k))
          out.fail("case " + std::to_string(out.cases) + ": key " + k + " of " + describe(m) + " from " + describe(a) +
                   " | " + describe(b));
      if (m.action != a.action || m.device != a.device) out.fail("merge changed the base action or device");
    } catch (const Error& e) {
      if (e.code() != "empty_merge" || !expect_empty)
        out.fail("case " + std::to_string(out.cases) + ": unexpected " + e.code() + " for " + describe(a) + " | " +
                 describe(b));
    }
  }
  if (out.cases < pairs) out.fail("generator produced only " + std::to_string(out.cases) + " soft pairs");
  return out;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Outcome parser_roundtrip(const std::filesystem::path& sample, std::size_t generated, std::uint64_t seed) {
  Outcome out;
  auto check = [&](const std::string& text, const std::string& label) {
    ++out.cases;
    const auto first = parse_policy_set({text, label});
    if (!first.ok()) return out.fail(label + ": " + first.diagnostics.front().format(label));
    const auto rendered = render_policy_set(first.clauses);
    const auto second = parse_policy_set({rendered, label});
    if (!second.ok()) return out.fail(label + " rendered: " + second.diagnostics.front().format(label));
    if (second.clauses != first.clauses) return out.fail(label + ": parse . render . parse differs");
    if (render_policy_set(second.clauses) != rendered) out.fail(label + ": rendering is not stable");
  };
  check(slurp(sample), sample.filename().string());
  gen::Rng rng(seed);
  for (std::size_t n = 0; n < generated; ++n) {
    const auto ast = gen::clause_ast(rng);
    const auto text = render_policy_set({ast});
    check(text, "generated #" + std::to_string(n));
    const auto back = parse_policy_set({text});
    if (back.ok() && (back.clauses.size() != 1 || back.clauses[0] != ast))
      out.fail("generated #" + std::to_string(n) + " does not parse back to itself: " + text);
  }
  return out;
}

inline PriorityTable seeded_table() {
  auto t = bootstrap("owner");
  t = add_user({"owner", "alice", 0, true, std::nullopt, "mother"}, t, 0).table;
  t = add_user({"owner", "gary", 2, false, std::nullopt, "guest"}, t, 0).table;
  t = add_user({"owner", "pat", 1, false, std::nullopt, "adult"}, t, 0).table;
  t = add_user({"owner", "quinn", 1, true, std::nullopt, "adult"}, t, 0).table;
  return t;
}

inline std::string error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

/// The seven household rules for adding users and assigning classes.
inline Outcome priority_rules() {
  Outcome out;
  auto expect = [&](bool cond, const std::string& rule) {
    ++out.cases;
    if (!cond) out.fail(rule);
  };

  // 1. anyone may add users within their authority
  {
    auto r = add_user({"gary", "kid", 3, false, std::nullopt, "child"}, seeded_table(), 0);
    expect(r.outcome == AddOutcome::Inserted && r.table.class_of("kid") == 3, "a guest can add a child");
  }
  // 2. the hub owner holds class 0 and outranks everyone
  {
    auto t = seeded_table();
    const auto& o = t.at("owner");
    expect(o.priority == 0 && o.device_perm && !o.expiry && !o.commander, "owner bootstraps at class 0");
    expect(!error_code([&] { bootstrap(t, "mallory"); }).empty(), "bootstrap refuses a second owner");
    bool tops = true;
    for (const auto& u : {"gary", "pat", "quinn"}) tops = tops && outranks("owner", u, t);
    expect(tops, "owner outranks every later user");
  }
  // 3. a lower number is a higher authority
  {
    auto t = seeded_table();
    expect(outranks("pat", "gary", t) && !outranks("gary", "pat", t), "class 1 outranks class 2");
    expect(!outranks("pat", "pat", t) && same_class("pat", "pat", t), "outranks is irreflexive");
    expect(same_class("pat", "quinn", t) && !outranks("pat", "quinn", t), "equal classes do not outrank");
  }
  // 4. assign the same or a higher number only
  {
    auto t = seeded_table();
    expect(add_user({"pat", "ned", 1, false, std::nullopt, ""}, t, 0).outcome == AddOutcome::Inserted,
           "class 1 may assign class 1");
    expect(error_code([&] { add_user({"gary", "ned", 1, false, std::nullopt, ""}, t, 0); }) ==
               "AssignAboveOwnAuthority",
           "class 2 may not assign class 1");
  }
  // 5. two commanders of different rank: the higher one wins, in either order
  {
    auto t = seeded_table();
    auto r1 = add_user({"gary", "kyle", 2, false, std::nullopt, ""}, t, 0);
    auto r2 = add_user({"alice", "kyle", 3, false, std::nullopt, ""}, r1.table, 0);
    expect(r2.outcome == AddOutcome::Reassigned && r2.table.class_of("kyle") == 3, "outranking re-add replaces");
    auto s1 = add_user({"alice", "kyle", 3, false, std::nullopt, ""}, t, 0);
    auto s2 = add_user({"gary", "kyle", 2, false, std::nullopt, ""}, s1.table, 0);
    expect(s2.outcome == AddOutcome::KeptExisting && s2.table.class_of("kyle") == 3, "outranked re-add is ignored");
  }
  // 6. equal rank, different classes: pending until someone settles it
  {
    auto t = seeded_table();
    auto r1 = add_user({"pat", "kyle", 2, false, std::nullopt, ""}, t, 0);
    auto r2 = add_user({"quinn", "kyle", 3, false, std::nullopt, ""}, r1.table, 0);
    const bool told_both = std::count(r2.notify.begin(), r2.notify.end(), "pat") &&
                           std::count(r2.notify.begin(), r2.notify.end(), "quinn");
    expect(r2.outcome == AddOutcome::Pending && r2.table.at("kyle").pending.has_value() && told_both,
           "equal-rank disagreement is pending and both commanders hear of it");
    DeviceCommand cmd{"kyle", "thermostat_1", SetValue{"temperature", 70}, 0, std::nullopt};
    DeviceRoster devs{{"thermostat_1", make_device("thermostat_1", DeviceKind::Thermostat)}};
    auto d = authorize(cmd, RuleTable{}, r2.table, {}, 0, devs);
    expect(!d.allowed() && d.reason == DenialReason::PendingResolution, "a pending user is blocked");
    auto settled = resolve_pending(r2.table, "kyle", "quinn", 3, 0);
    expect(!settled.at("kyle").pending && settled.class_of("kyle") == 3, "a commander settles the class");
    expect(authorize(cmd, RuleTable{}, settled, {}, 0, devs).allowed(), "a settled user may act");
  }
  // 7. device permission only from someone who has it
  {
    auto t = seeded_table();
    expect(error_code([&] { add_user({"pat", "ned", 2, true, std::nullopt, ""}, t, 0); }) == "DevicePermEscalation",
           "no device permission to give");
    auto r = add_user({"quinn", "ned", 2, true, std::nullopt, ""}, t, 0);
    expect(r.table.at("ned").device_perm, "device permission passes down");
  }
  // temporary users leave at the end of their validity, boundary included
  {
    auto t = add_user({"owner", "tmp", 4, false, Instant{172800}, "temporary"}, seeded_table(), 0).table;
    expect(remove_expired(t, 172799).second.empty(), "still valid one second before");
    auto [after, gone] = remove_expired(t, 172800);
    expect(gone == std::vector<UserId>{"tmp"} && !after.contains("tmp"), "removed at the expiry instant");
    expect(remove_expired(after, 172800).first == after, "expiry sweep is idempotent");
  }
  return out;
}

/// Permit/deny semantics evaluated from the rule text for set_value commands.
inline bool expected_allow(const std::vector<PolicyClause>& clauses, const UserId& actor, const DeviceId& device,
                           std::int64_t value, const PresenceMap& presence, Instant now) {
  const auto minute = (now % 86400) / 60;
  auto known = [&](const Condition& c, bool& holds) {
    std::int64_t v;
    if (c.is_presence()) {
      auto it = presence.find(c.presence_of);
      v = it == presence.end() ? 0 : static_cast<std::int64_t>(it->second);
    } else if (c.attribute == "time") {
      v = minute;
    } else if (c.attribute == "temperature") {
      v = value;
    } else {
      return false;
    }
    holds = oracle::holds(c, v);
    return true;
  };
  auto governs = [&](const PolicyClause& c) {
    if (c.device != device) return false;
    if (c.subject) return *c.subject == actor;
    if (std::count(c.exempt.begin(), c.exempt.end(), actor)) return false;
    return !(c.action == Action::Restrict && std::count(c.owners.begin(), c.owners.end(), actor));
  };
  for (const auto& c : clauses) {
    if (!governs(c) || c.action != Action::Restrict) continue;
    bool all = true;
    for (const auto& cond : c.conditions) {
      bool h = false;
      all = all && known(cond, h) && h;
    }
    if (all) return false;
  }
  for (const auto& c : clauses) {
    if (!governs(c) || c.action != Action::Demand) continue;
    // presence of anyone but the subject switches a demand on or off
    auto gate = [&](const Condition& cond) { return cond.is_presence() && (!c.subject || cond.presence_of != *c.subject); };
    bool on = true;
    for (const auto& cond : c.conditions) {
      bool h = false;
      if (gate(cond)) on = on && known(cond, h) && h;
    }
    if (!on) continue;
    for (const auto& cond : c.conditions) {
      bool h = false;
      if (!gate(cond) && known(cond, h) && !h) return false;
    }
  }
  return true;
}

inline Outcome enforcement_vs_oracle(std::size_t tables, std::uint64_t seed) {
  Outcome out;
  gen::Rng rng(seed);
  DeviceRoster devs{{"thermostat_1", make_device("thermostat_1", DeviceKind::Thermostat)}};
  for (std::size_t n = 0; n < tables; ++n) {
    auto table = gen::table(rng);
    std::vector<PolicyClause> clauses;
    for (int k = 0, m = static_cast<int>(rng.between(0, 6)); k < m; ++k)
      clauses.push_back(gen::clause(rng, static_cast<std::uint64_t>(k + 1), "thermostat_1"));
    PresenceMap presence;
    for (const auto& u : gen::roster()) presence[u] = rng.chance(50) ? Presence::Home : Presence::Away;
    const Instant now = rng.below(86400);
    const auto rules = rebuild_table(clauses);
    for (const auto& actor : gen::roster())
      for (std::int64_t v = 50; v <= 90; v += 5) {
        ++out.cases;
        DeviceCommand cmd{actor, "thermostat_1", SetValue{"temperature", v}, now, std::nullopt};
        const bool got = authorize(cmd, rules, table, presence, now, devs).allowed();
        if (got != expected_allow(clauses, actor, "thermostat_1", v, presence, now))
          out.fail("table " + std::to_string(n) + " actor " + actor + " value " + std::to_string(v) + ": got " +
                   (got ? "allow" : "deny"));
      }
  }
  return out;
}

}  // namespace suites
