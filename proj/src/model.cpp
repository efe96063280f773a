#include "homeguard/model.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace homeguard {

std::string_view to_string(Action a) { return a == Action::Demand ? "demand" : "restrict"; }

std::string_view to_string(Presence p) { return p == Presence::Home ? "Home" : "Away"; }

Action action_from_string(std::string_view s) {
  if (s == "demand") return Action::Demand;
  if (s == "restrict") return Action::Restrict;
  throw Error("bad_action", "unknown action '" + std::string(s) + "'");
}

Presence presence_from_string(std::string_view s) {
  if (s == "Home" || s == "home") return Presence::Home;
  if (s == "Away" || s == "away") return Presence::Away;
  throw Error("bad_presence", "unknown presence '" + std::string(s) + "' (expected Home or Away)");
}

std::string Condition::key() const {
  if (is_presence()) return attribute + "@" + presence_of;
  return attribute;
}

ConditionSet::ConditionSet(std::vector<Condition> conds) {
  for (auto& c : conds) insert(std::move(c));
}

const Condition* ConditionSet::find(const std::string& key) const {
  for (const auto& c : items_)
    if (c.key() == key) return &c;
  return nullptr;
}

void ConditionSet::insert(Condition c) {
  const auto k = c.key();
  if (find(k)) throw Error("duplicate_condition", "condition on '" + k + "' appears twice");
  auto pos = std::lower_bound(items_.begin(), items_.end(), k,
                              [](const Condition& x, const std::string& key) { return x.key() < key; });
  items_.insert(pos, std::move(c));
}

void ConditionSet::assign(Condition c) {
  erase(c.key());
  insert(std::move(c));
}

bool ConditionSet::erase(const std::string& key) {
  return std::erase_if(items_, [&](const Condition& c) { return c.key() == key; }) != 0;
}

std::vector<std::string> ConditionSet::keys() const {
  std::vector<std::string> out;
  for (const auto& c : items_) out.push_back(c.key());
  return out;
}

bool PolicyClause::applies_to(const UserId& u) const {
  if (subject) return *subject == u;
  if (std::find(exempt.begin(), exempt.end(), u) != exempt.end()) return false;
  // a general restriction never binds its own author
  if (action == Action::Restrict && std::find(owners.begin(), owners.end(), u) != owners.end()) return false;
  return true;
}

std::string_view to_string(DeviceKind k) {
  switch (k) {
    case DeviceKind::Thermostat: return "thermostat";
    case DeviceKind::Lock: return "lock";
    case DeviceKind::Light: return "light";
    case DeviceKind::Camera: return "camera";
    case DeviceKind::Sensor: return "sensor";
  }
  return "?";
}

DeviceKind device_kind_from_string(std::string_view s) {
  for (auto k : {DeviceKind::Thermostat, DeviceKind::Lock, DeviceKind::Light, DeviceKind::Camera, DeviceKind::Sensor})
    if (to_string(k) == s) return k;
  throw Error("bad_device_kind", "unknown device kind '" + std::string(s) + "'");
}

DeviceDescriptor make_device(const DeviceId& id, DeviceKind kind) {
  DeviceDescriptor d{id, kind, false, std::nullopt, true};
  switch (kind) {
    case DeviceKind::Thermostat: d.value_attribute = ValueAttribute{"temperature", 50, 90, "F"}; break;
    case DeviceKind::Light: d.value_attribute = ValueAttribute{"level", 0, 100, "%"}; break;
    case DeviceKind::Lock:
    case DeviceKind::Camera: d.is_binary = true; break;
    case DeviceKind::Sensor: break;
  }
  return d;
}

DomainCatalog DomainCatalog::defaults() {
  DomainCatalog d;
  d.set("temperature", 50, 90);
  d.set("level", 0, 100);
  return d;
}

void DomainCatalog::set(const std::string& attribute, std::int64_t lo, std::int64_t hi) {
  numeric_[attribute] = IntervalSet::single(lo, hi);
}

void DomainCatalog::learn(const DeviceDescriptor& d) {
  if (d.value_attribute && !numeric_.count(d.value_attribute->name))
    set(d.value_attribute->name, d.value_attribute->lo, d.value_attribute->hi);
}

IntervalSet DomainCatalog::domain_of(const std::string& attribute) const {
  if (attribute == kTimeAttribute) return time_domain();
  if (attribute == kLocationAttribute || attribute.rfind("location@", 0) == 0) return presence_domain();
  auto it = numeric_.find(attribute);
  return it == numeric_.end() ? fallback_domain() : it->second;
}

IntervalSet DomainCatalog::domain_of(const Condition& c) const {
  if (c.is_presence()) return presence_domain();
  if (std::holds_alternative<TimeWindow>(c.predicate)) return time_domain();
  return domain_of(c.attribute);
}

IntervalSet clock_region(const std::vector<ClockSpan>& windows) {
  std::vector<Interval> parts;
  for (const auto& w : windows) {
    if (w.start_minute == w.end_minute) {
      parts.push_back({0, kMinutesPerDay - 1});
    } else if (w.start_minute < w.end_minute) {
      parts.push_back({w.start_minute, w.end_minute - 1});
    } else {
      parts.push_back({w.start_minute, kMinutesPerDay - 1});
      parts.push_back({0, w.end_minute - 1});
    }
  }
  return IntervalSet(std::move(parts));
}

namespace {

IntervalSet raw_region(const Condition& c) {
  return std::visit(
      [](const auto& p) -> IntervalSet {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, NumericRange>) {
          return p.ranges;
        } else if constexpr (std::is_same_v<T, TimeWindow>) {
          return clock_region(p.windows);
        } else {
          std::vector<Interval> parts;
          for (auto v : p.values) parts.push_back({static_cast<int>(v), static_cast<int>(v)});
          return IntervalSet(std::move(parts));
        }
      },
      c.predicate);
}

bool excluded(const Condition& c) {
  return std::visit([](const auto& p) { return p.excluded; }, c.predicate);
}

std::vector<ClockSpan> spans_of(const IntervalSet& region) {
  std::vector<ClockSpan> out;
  const auto& parts = region.parts();
  if (parts.size() == 1 && parts[0].lo == 0 && parts[0].hi == kMinutesPerDay - 1) return {ClockSpan{0, 0}};
  std::size_t first = 0, last = parts.size();
  // fold a window running through midnight back into one span
  const bool wraps = parts.size() > 1 && parts.front().lo == 0 && parts.back().hi == kMinutesPerDay - 1;
  if (wraps) {
    out.push_back({static_cast<int>(parts.back().lo), static_cast<int>(parts.front().hi + 1)});
    first = 1;
    last = parts.size() - 1;
  }
  for (std::size_t k = first; k < last; ++k)
    out.push_back({static_cast<int>(parts[k].lo), static_cast<int>((parts[k].hi + 1) % kMinutesPerDay)});
  std::sort(out.begin(), out.end(), [](const ClockSpan& a, const ClockSpan& b) { return a.start_minute < b.start_minute; });
  return out;
}

}  // namespace

IntervalSet condition_region(const Condition& c, const DomainCatalog& domains) {
  const auto domain = domains.domain_of(c);
  const auto r = raw_region(c).intersect(domain);
  return excluded(c) ? r.complement(domain) : r;
}

bool condition_holds(const Condition& c, std::int64_t value) { return raw_region(c).contains(value) != excluded(c); }

Condition condition_from_region(const std::string& attribute, const UserId& presence_of, const IntervalSet& region,
                                const DomainCatalog& domains) {
  if (region.empty()) throw Error("empty_region", "no value satisfies the condition on '" + attribute + "'");
  Condition c{attribute, presence_of, NumericRange{}};
  if (!presence_of.empty() || attribute == kLocationAttribute) {
    PresenceSet p;
    if (region.contains(0)) p.values.push_back(Presence::Away);
    if (region.contains(1)) p.values.push_back(Presence::Home);
    c.predicate = p;
  } else if (attribute == kTimeAttribute) {
    c.predicate = TimeWindow{spans_of(region.intersect(DomainCatalog::time_domain())), false};
  } else {
    c.predicate = NumericRange{region.intersect(domains.domain_of(attribute)), false};
  }
  return c;
}

Condition simplest_condition(const Condition& c, const DomainCatalog& domains) {
  const auto domain = domains.domain_of(c);
  const auto region = condition_region(c, domains);
  auto in = condition_from_region(c.attribute, c.presence_of, region, domains);
  const auto rest = region.complement(domain);
  if (c.is_presence() || rest.empty() || rest.parts().size() >= region.parts().size()) return in;
  auto out = condition_from_region(c.attribute, c.presence_of, rest, domains);
  std::visit([](auto& p) { p.excluded = true; }, out.predicate);
  return out;
}

AllowedRegion allowed_region(const PolicyClause& clause, const std::string& key, const DomainCatalog& domains) {
  if (const auto* c = clause.conditions.find(key)) return {key, condition_region(*c, domains)};
  return {key, domains.domain_of(key)};
}

Condition condition_from_ast(const ConditionAst& ast, const UserId& implicit_presence) {
  const bool negated = ast.op == ConditionOp::NotIn;
  std::string attr = ast.attribute;
  UserId who;
  const bool location = attr == kLocationAttribute || attr.rfind("location.", 0) == 0;
  if (location) {
    who = attr.size() > kLocationAttribute.size() ? attr.substr(kLocationAttribute.size() + 1) : implicit_presence;
    attr = std::string(kLocationAttribute);
  }
  return std::visit(
      [&](const auto& items) -> Condition {
        using T = std::decay_t<decltype(items)>;
        if constexpr (std::is_same_v<T, IdentItems>) {
          if (!location)
            throw Error("unsupported_condition", "attribute '" + attr + "' does not take named values");
          std::set<Presence> vals;
          for (const auto& v : items) vals.insert(presence_from_string(v));
          return Condition{attr, who, PresenceSet{{vals.begin(), vals.end()}, negated}};
        } else {
          if (location) throw Error("unsupported_condition", "location takes Home or Away");
          if constexpr (std::is_same_v<T, ClockItems>) {
            if (attr != kTimeAttribute)
              throw Error("unsupported_condition", "clock values are only valid for 'time'");
            return Condition{attr, "", TimeWindow{items, negated}};
          } else {
            if (attr == kTimeAttribute) throw Error("unsupported_condition", "time takes clock values like 7:00pm");
            return Condition{attr, "", NumericRange{IntervalSet(items), negated}};
          }
        }
      },
      ast.value);
}

ConditionAst condition_to_ast(const Condition& c, const UserId& implicit_presence) {
  ConditionAst a;
  a.attribute = c.attribute;
  if (c.is_presence() && c.presence_of != implicit_presence) a.attribute += "." + c.presence_of;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        a.op = p.excluded ? ConditionOp::NotIn : ConditionOp::In;
        if constexpr (std::is_same_v<T, NumericRange>) {
          a.value = p.ranges.parts();
        } else if constexpr (std::is_same_v<T, TimeWindow>) {
          a.value = p.windows;
        } else {
          IdentItems v;
          for (auto x : p.values) v.emplace_back(to_string(x));
          a.value = v;
        }
      },
      c.predicate);
  return a;
}

ClauseAst clause_to_ast(const PolicyClause& c) {
  ClauseAst a;
  a.owner = c.owner();
  a.action = c.action == Action::Demand ? ClauseAction::Demand : ClauseAction::Restrict;
  if (c.subject) a.targets = {*c.subject};
  a.devices = {c.device};
  const UserId implicit = c.subject.value_or(c.owner());
  for (const auto& cond : c.conditions) a.conditions.push_back(condition_to_ast(cond, implicit));
  return a;
}

std::vector<PolicyClause> normalize(const ClauseAst& ast, Instant now, const PriorityTable& table,
                                    ClauseIdAllocator& ids) {
  (void)now;
  if (!table.contains(ast.owner)) throw Error("unknown_owner", "policy owner '" + ast.owner + "' is not a known user");
  if (ast.devices.empty()) throw Error("empty_devices", "clause names no device");

  std::vector<std::optional<UserId>> subjects;
  if (ast.targets.empty()) subjects.push_back(std::nullopt);
  for (const auto& t : ast.targets)
    if (std::find(subjects.begin(), subjects.end(), std::optional<UserId>(t)) == subjects.end())
      subjects.emplace_back(t);
  std::vector<DeviceId> devices;
  for (const auto& d : ast.devices)
    if (std::find(devices.begin(), devices.end(), d) == devices.end()) devices.push_back(d);

  std::vector<PolicyClause> out;
  for (const auto& subject : subjects) {
    const UserId implicit = subject.value_or(ast.owner);
    ConditionSet conds;
    for (const auto& c : ast.conditions) conds.insert(condition_from_ast(c, implicit));
    if (ast.action == ClauseAction::Location) {
      const std::string key = std::string(kLocationAttribute) + "@" + implicit;
      if (!conds.find(key))
        conds.insert(Condition{std::string(kLocationAttribute), implicit, PresenceSet{{Presence::Home}, false}});
    }
    for (const auto& d : devices) {
      PolicyClause pc;
      pc.id = ids.take();
      pc.owners = {ast.owner};
      pc.subject = subject;
      pc.device = d;
      pc.conditions = conds;
      pc.action = ast.action == ClauseAction::Restrict ? Action::Restrict : Action::Demand;
      out.push_back(std::move(pc));
    }
  }
  return out;
}

PolicyClause clause_from_device_policy(const DevicePolicyArray& p, ClauseId id) {
  if (p.user.empty() || p.device.empty()) throw Error("empty_policy", "device policy needs U and D");
  if (!p.time && !p.value && !p.restricted)
    throw Error("empty_policy", "device policy has no time, value or restricted-user field");
  const bool general = !p.restricted || *p.restricted == "0" || *p.restricted == "General" || *p.restricted == "general";
  PolicyClause pc;
  pc.id = id;
  pc.owners = {p.user};
  pc.device = p.device;
  pc.action = general ? Action::Demand : Action::Restrict;
  if (!general) pc.subject = *p.restricted;
  // a restriction fires outside the window and range the array names
  const bool negate = !general;
  if (p.time) pc.conditions.insert(Condition{std::string(kTimeAttribute), "", TimeWindow{{*p.time}, negate}});
  if (p.value) {
    if (p.value->lo > p.value->hi) throw Error("empty_policy", "device policy value range is inverted");
    const std::string attr = p.value_attribute.empty() ? "temperature" : p.value_attribute;
    pc.conditions.insert(Condition{attr, "", NumericRange{IntervalSet{*p.value}, negate}});
  }
  return pc;
}

std::string describe(const PolicyClause& c) {
  std::ostringstream os;
  os << '#' << to_underlying(c.id) << ' ';
  for (std::size_t k = 0; k < c.owners.size(); ++k) os << (k ? "+" : "") << c.owners[k];
  os << ": " << render_clause(clause_to_ast(c));
  if (!c.exempt.empty()) {
    os << " except";
    for (const auto& u : c.exempt) os << ' ' << u;
  }
  return os.str();
}

}  // namespace homeguard
