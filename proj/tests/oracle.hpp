#pragma once

// Brute-force reference for the conflict rules and seeded generators for
// property tests. Regions here are bitmaps built by testing every value of a
// discretized domain; nothing below calls the interval code under test.

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "homeguard/conflict.hpp"
#include "homeguard/model.hpp"
#include "homeguard/policy_lang.hpp"

namespace oracle {

using namespace homeguard;

struct Domain {
  std::int64_t lo;
  std::int64_t hi;
};

inline Domain domain_for(const std::string& key) {
  if (key == "temperature") return {50, 90};
  if (key == "level") return {0, 100};
  if (key == "time") return {0, 1439};
  return {0, 1};  // location@user
}

inline bool in_span(const ClockSpan& s, std::int64_t m) {
  if (s.start_minute == s.end_minute) return true;
  if (s.start_minute < s.end_minute) return m >= s.start_minute && m < s.end_minute;
  return m >= s.start_minute || m < s.end_minute;
}

inline bool holds(const Condition& c, std::int64_t v) {
  bool inside = false;
  bool excluded = false;
  if (const auto* n = std::get_if<NumericRange>(&c.predicate)) {
    for (const auto& p : n->ranges.parts()) inside = inside || (v >= p.lo && v <= p.hi);
    excluded = n->excluded;
  } else if (const auto* t = std::get_if<TimeWindow>(&c.predicate)) {
    for (const auto& s : t->windows) inside = inside || in_span(s, v);
    excluded = t->excluded;
  } else {
    const auto& p = std::get<PresenceSet>(c.predicate);
    for (auto x : p.values) inside = inside || static_cast<std::int64_t>(x) == v;
    excluded = p.excluded;
  }
  return inside != excluded;
}

using Bitmap = std::vector<bool>;

/// Membership scan of a clause's condition on `key`; an absent condition admits the whole domain.
inline Bitmap region(const PolicyClause& c, const std::string& key) {
  const auto d = domain_for(key);
  Bitmap out(static_cast<std::size_t>(d.hi - d.lo + 1), true);
  const auto* cond = c.conditions.find(key);
  if (!cond) return out;
  for (std::int64_t v = d.lo; v <= d.hi; ++v) out[static_cast<std::size_t>(v - d.lo)] = holds(*cond, v);
  return out;
}

inline Bitmap region_of(const IntervalSet& s, const std::string& key) {
  const auto d = domain_for(key);
  Bitmap out(static_cast<std::size_t>(d.hi - d.lo + 1), false);
  for (std::int64_t v = d.lo; v <= d.hi; ++v) out[static_cast<std::size_t>(v - d.lo)] = s.contains(v);
  return out;
}

inline bool any_common(const Bitmap& a, const Bitmap& b) {
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a[k] && b[k]) return true;
  return false;
}

inline Bitmap both(const Bitmap& a, const Bitmap& b) {
  Bitmap out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] && b[k];
  return out;
}

inline Bitmap but_not(const Bitmap& a, const Bitmap& b) {
  Bitmap out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] && !b[k];
  return out;
}

inline const char* kOutsider = "\x01someone-else";

/// Users a clause governs, over a roster plus one stand-in for everyone not on it.
inline std::set<std::string> governed(const PolicyClause& c, const std::vector<std::string>& roster) {
  std::set<std::string> out;
  if (c.subject) {
    out.insert(*c.subject);
    return out;
  }
  auto skip = [&](const std::string& u) {
    if (std::find(c.exempt.begin(), c.exempt.end(), u) != c.exempt.end()) return true;
    // a household-wide restriction does not bind the person who wrote it
    return c.action == Action::Restrict && std::find(c.owners.begin(), c.owners.end(), u) != c.owners.end();
  };
  for (const auto& u : roster)
    if (!skip(u)) out.insert(u);
  out.insert(kOutsider);
  return out;
}

inline bool interfere(const PolicyClause& a, const PolicyClause& b, const std::vector<std::string>& roster) {
  if (a.device != b.device) return false;
  const auto ga = governed(a, roster), gb = governed(b, roster);
  for (const auto& u : ga)
    if (gb.count(u)) return true;
  return false;
}

inline int class_of(const PolicyClause& c, const PriorityTable& t) {
  int best = 1 << 20;
  for (const auto& o : c.owners) best = std::min(best, t.at(o).priority);
  return best;
}

/// The classification straight from the rule text.
inline ConflictClass classify(const PolicyClause& a, const PolicyClause& b, const PriorityTable& t,
                              const std::vector<std::string>& roster) {
  if (a.owners == b.owners) return ConflictClass::None;
  if (!interfere(a, b, roster)) return ConflictClass::None;
  std::vector<std::string> keys;
  for (const auto& c : a.conditions)
    if (b.conditions.find(c.key())) keys.push_back(c.key());

  bool every_overlap = true, some_disjoint = false, some_differ = false;
  for (const auto& k : keys) {
    const auto ra = region(a, k), rb = region(b, k);
    const bool ov = any_common(ra, rb);
    every_overlap = every_overlap && ov;
    some_disjoint = some_disjoint || !ov;
    some_differ = some_differ || ra != rb;
  }
  const int ca = class_of(a, t), cb = class_of(b, t);
  const bool same = a.action == b.action;
  if (!same) {
    const int r = a.action == Action::Restrict ? ca : cb;
    const int o = a.action == Action::Restrict ? cb : ca;
    if (r < o) return ConflictClass::RC;
  }
  if ((!same && every_overlap) || (same && some_disjoint)) return ca == cb ? ConflictClass::HCC : ConflictClass::HPC;
  if ((same && every_overlap) || (!same && some_differ)) return ca == cb ? ConflictClass::SCC : ConflictClass::SPC;
  return ConflictClass::None;
}

/// Expected merged region on `key`: base AND other (same action) or base AND NOT other.
inline Bitmap merged_region(const PolicyClause& base, const PolicyClause& other, const std::string& key) {
  const auto rb = region(base, key);
  if (!other.conditions.find(key)) return rb;
  const auto ro = region(other, key);
  return base.action == other.action ? both(rb, ro) : but_not(rb, ro);
}

}  // namespace oracle

namespace gen {

using namespace homeguard;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  std::int64_t below(std::int64_t n) { return static_cast<std::int64_t>(eng_() % static_cast<std::uint64_t>(n)); }
  std::int64_t between(std::int64_t lo, std::int64_t hi) { return lo + below(hi - lo + 1); }
  bool chance(int pct) { return below(100) < pct; }
  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(below(static_cast<std::int64_t>(v.size())))];
  }

 private:
  std::mt19937_64 eng_;
};

inline const std::vector<std::string>& roster() {
  static const std::vector<std::string> r{"ann", "ben", "cat", "dan", "eve"};
  return r;
}

/// Random classes 0..3 so that equal and unequal owners both show up often.
inline PriorityTable table(Rng& rng) {
  PriorityTable t;
  for (const auto& u : roster()) {
    UserEntry e;
    e.priority = static_cast<int>(rng.below(4));
    t.put(u, e);
  }
  return t;
}

inline IntervalSet ranges(Rng& rng, std::int64_t lo, std::int64_t hi) {
  std::vector<Interval> parts;
  const auto n = rng.between(1, 3);
  for (int k = 0; k < n; ++k) {
    // reach a little past the domain so clipping is exercised
    const auto a = rng.between(lo - 3, hi);
    const auto b = std::min(hi + 3, a + rng.between(0, (hi - lo) / 2));
    parts.push_back({a, b});
  }
  return IntervalSet(parts);
}

inline Condition value_condition(Rng& rng, const std::string& attr, std::int64_t lo, std::int64_t hi) {
  return Condition{attr, "", NumericRange{ranges(rng, lo, hi), rng.chance(40)}};
}

inline Condition time_condition(Rng& rng) {
  TimeWindow w;
  const auto n = rng.between(1, 2);
  for (int k = 0; k < n; ++k)
    w.windows.push_back({static_cast<int>(rng.below(96) * 15), static_cast<int>(rng.below(96) * 15)});
  w.excluded = rng.chance(40);
  return Condition{"time", "", w};
}

inline Condition presence_condition(Rng& rng, const std::string& who) {
  PresenceSet p;
  const auto mask = rng.between(1, 3);
  if (mask & 1) p.values.push_back(Presence::Away);
  if (mask & 2) p.values.push_back(Presence::Home);
  p.excluded = rng.chance(25);
  return Condition{"location", who, p};
}

/// Random clause over a thermostat and a dimmable light. Small condition
/// vocabularies keep common keys frequent.
inline PolicyClause clause(Rng& rng, std::uint64_t id, const std::string& device = "") {
  PolicyClause c;
  c.id = ClauseId{id};
  c.owners = {rng.pick(roster())};
  c.device = device.empty() ? (rng.chance(80) ? "thermostat_1" : "light_1") : device;
  if (rng.chance(45)) {
    c.subject = rng.pick(roster());
  } else if (rng.chance(25)) {
    c.exempt = {rng.pick(roster())};
  }
  c.action = rng.chance(50) ? Action::Demand : Action::Restrict;
  if (rng.chance(75)) {
    c.conditions.insert(c.device == "thermostat_1" ? value_condition(rng, "temperature", 50, 90)
                                                   : value_condition(rng, "level", 0, 100));
  }
  if (rng.chance(45)) c.conditions.insert(time_condition(rng));
  if (rng.chance(25)) c.conditions.insert(presence_condition(rng, rng.chance(50) ? c.owner() : rng.pick(roster())));
  return c;
}

/// Random surface clause for parser round trips.
inline ClauseAst clause_ast(Rng& rng) {
  static const std::vector<std::string> devices{"thermostat_1", "bulb_2", "lock_1", "camera_9", "coffeemaker"};
  ClauseAst a;
  a.owner = rng.pick(roster());
  a.action = static_cast<ClauseAction>(rng.below(3));
  if (rng.chance(50)) {
    std::set<std::string> t;
    for (int k = 0, n = static_cast<int>(rng.between(1, 3)); k < n; ++k) t.insert(rng.pick(roster()));
    a.targets.assign(t.begin(), t.end());
  }
  std::set<std::string> d;
  for (int k = 0, n = static_cast<int>(rng.between(1, 2)); k < n; ++k) d.insert(rng.pick(devices));
  a.devices.assign(d.begin(), d.end());
  std::set<std::string> used;
  for (int k = 0, n = static_cast<int>(rng.below(4)); k < n; ++k) {
    ConditionAst c;
    c.op = rng.chance(50) ? ConditionOp::In : ConditionOp::NotIn;
    switch (rng.below(4)) {
      case 0: {
        c.attribute = "temperature";
        NumericItems items;
        for (int m = 0, cnt = static_cast<int>(rng.between(1, 2)); m < cnt; ++m) {
          const auto lo = rng.between(50, 85);
          items.push_back({lo, lo + rng.between(0, 5)});
        }
        c.value = items;
        break;
      }
      case 1: {
        c.attribute = "time";
        c.value = ClockItems{{static_cast<int>(rng.below(1440)), static_cast<int>(rng.below(1440))}};
        break;
      }
      case 2: {
        c.attribute = rng.chance(50) ? "location" : "location." + rng.pick(roster());
        c.value = IdentItems{rng.chance(50) ? "Home" : "Away"};
        break;
      }
      default: {
        c.attribute = "level";
        const auto lo = rng.between(0, 90);
        c.value = NumericItems{{lo, lo + rng.between(0, 10)}};
      }
    }
    if (used.insert(c.attribute).second) a.conditions.push_back(c);
  }
  return a;
}

}  // namespace gen
