#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "homeguard/policy_lang.hpp"
#include "homeguard/priority.hpp"
#include "homeguard/region.hpp"
#include "homeguard/types.hpp"

namespace homeguard {

inline constexpr std::string_view kTimeAttribute = "time";
inline constexpr std::string_view kLocationAttribute = "location";

struct NumericRange {
  IntervalSet ranges;
  bool excluded = false;
  friend bool operator==(const NumericRange&, const NumericRange&) = default;
};

struct TimeWindow {
  std::vector<ClockSpan> windows;
  bool excluded = false;
  friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

struct PresenceSet {
  std::vector<Presence> values;  // sorted, unique
  bool excluded = false;
  friend bool operator==(const PresenceSet&, const PresenceSet&) = default;
};

using Predicate = std::variant<NumericRange, TimeWindow, PresenceSet>;

struct Condition {
  std::string attribute;
  /// Whose presence a location condition reads. Empty for non-presence attributes.
  UserId presence_of;
  Predicate predicate;

  /// Identity inside a ConditionSet: the attribute, qualified by user for presence.
  std::string key() const;
  bool is_presence() const { return std::holds_alternative<PresenceSet>(predicate); }

  friend bool operator==(const Condition&, const Condition&) = default;
};

/// Conjunction of conditions, at most one per key, kept sorted by key.
class ConditionSet {
 public:
  ConditionSet() = default;
  /// Throws Error("duplicate_condition") when two conditions share a key.
  explicit ConditionSet(std::vector<Condition> conds);

  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }
  const std::vector<Condition>& items() const { return items_; }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  const Condition* find(const std::string& key) const;
  void insert(Condition c);  // throws on duplicate key
  void assign(Condition c);  // replaces any condition with the same key
  bool erase(const std::string& key);
  std::vector<std::string> keys() const;

  friend bool operator==(const ConditionSet&, const ConditionSet&) = default;

 private:
  std::vector<Condition> items_;
};

struct PolicyClause {
  ClauseId id{};
  std::vector<UserId> owners;      // sorted, unique; two after a merge
  std::optional<UserId> subject;   // nullopt: all users
  std::vector<UserId> exempt;      // users carved out of an all-users clause
  DeviceId device;
  ConditionSet conditions;
  Action action = Action::Demand;
  std::optional<Instant> expiry;
  std::vector<ClauseId> sources;   // clauses this one was derived from

  const UserId& owner() const { return owners.front(); }
  bool is_general() const { return !subject.has_value(); }
  bool applies_to(const UserId& u) const;
  std::string subject_label() const { return subject.value_or("*"); }

  friend bool operator==(const PolicyClause&, const PolicyClause&) = default;
};

enum class DeviceKind { Thermostat, Lock, Light, Camera, Sensor };

std::string_view to_string(DeviceKind k);
DeviceKind device_kind_from_string(std::string_view s);

struct ValueAttribute {
  std::string name;
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  std::string unit;
  friend bool operator==(const ValueAttribute&, const ValueAttribute&) = default;
};

struct DeviceDescriptor {
  DeviceId id;
  DeviceKind kind = DeviceKind::Sensor;
  bool is_binary = false;
  std::optional<ValueAttribute> value_attribute;
  bool removable_requires_perm = true;

  friend bool operator==(const DeviceDescriptor&, const DeviceDescriptor&) = default;
};

/// Roster defaults per kind: thermostat [50,90] F, light level [0,100],
/// lock and camera binary, sensor neither.
DeviceDescriptor make_device(const DeviceId& id, DeviceKind kind);

/// Device policy array {U, D, C1, C2, R}.
struct DevicePolicyArray {
  UserId user;
  DeviceId device;
  std::optional<ClockSpan> time;         // C1
  std::optional<Interval> value;         // C2
  std::string value_attribute;           // name C2 constrains; empty: "temperature"
  std::optional<UserId> restricted;      // R; nullopt or "0" means general

  friend bool operator==(const DevicePolicyArray&, const DevicePolicyArray&) = default;
};

/// Attribute domains at unit resolution.
class DomainCatalog {
 public:
  static DomainCatalog defaults();
  static IntervalSet time_domain() { return IntervalSet::single(0, kMinutesPerDay - 1); }
  static IntervalSet presence_domain() { return IntervalSet::single(0, 1); }
  static IntervalSet fallback_domain() { return IntervalSet::single(-1000000, 1000000); }

  void set(const std::string& attribute, std::int64_t lo, std::int64_t hi);
  void learn(const DeviceDescriptor& d);
  IntervalSet domain_of(const std::string& attribute) const;
  IntervalSet domain_of(const Condition& c) const;

 private:
  std::map<std::string, IntervalSet> numeric_;
};

struct AllowedRegion {
  std::string attribute;  // condition key
  IntervalSet region;
  friend bool operator==(const AllowedRegion&, const AllowedRegion&) = default;
};

/// Time window list as a set of minutes of day.
IntervalSet clock_region(const std::vector<ClockSpan>& windows);
/// The set of values over which a condition holds, clipped to its domain.
IntervalSet condition_region(const Condition& c, const DomainCatalog& domains);
/// Builds an inclusion-form condition whose region is exactly `region`.
Condition condition_from_region(const std::string& attribute, const UserId& presence_of,
                                const IntervalSet& region, const DomainCatalog& domains);
/// Same region, prefer a notin form when it reads shorter.
Condition simplest_condition(const Condition& c, const DomainCatalog& domains);

bool condition_holds(const Condition& c, std::int64_t value);

AllowedRegion allowed_region(const PolicyClause& clause, const std::string& key, const DomainCatalog& domains);

class ClauseIdAllocator {
 public:
  explicit ClauseIdAllocator(std::uint64_t next = 1) : next_(next) {}
  ClauseId take() { return ClauseId{next_++}; }
  std::uint64_t peek() const { return next_; }

 private:
  std::uint64_t next_;
};

/// Expands targets x devices into clauses. A location action becomes a demand
/// gated on the subject being Home.
std::vector<PolicyClause> normalize(const ClauseAst& ast, Instant now, const PriorityTable& table,
                                    ClauseIdAllocator& ids);

PolicyClause clause_from_device_policy(const DevicePolicyArray& p, ClauseId id);

/// `implicit_presence` is whose presence a bare `location` reads; `location.<user>`
/// names another user explicitly.
Condition condition_from_ast(const ConditionAst& ast, const UserId& implicit_presence);
ConditionAst condition_to_ast(const Condition& c, const UserId& implicit_presence);
/// Textual form of a normalized clause, owned by its first owner.
ClauseAst clause_to_ast(const PolicyClause& c);

std::string describe(const PolicyClause& c);

}  // namespace homeguard
