#include "homeguard/enforcement.hpp"

#include <algorithm>

namespace homeguard {

std::string_view to_string(ThreatTag t) {
  switch (t) {
    case ThreatTag::T1: return "T1";
    case ThreatTag::T2: return "T2";
    case ThreatTag::T3: return "T3";
    case ThreatTag::T4: return "T4";
    case ThreatTag::T5: return "T5";
  }
  return "?";
}

ThreatTag threat_tag_from_string(std::string_view s) {
  for (auto t : {ThreatTag::T1, ThreatTag::T2, ThreatTag::T3, ThreatTag::T4, ThreatTag::T5})
    if (to_string(t) == s) return t;
  throw Error("bad_threat", "unknown threat tag '" + std::string(s) + "'");
}

std::string_view to_string(Origin o) { return o == Origin::HomeNetwork ? "home_network" : "remote"; }

Origin origin_from_string(std::string_view s) {
  if (s == "home_network") return Origin::HomeNetwork;
  if (s == "remote") return Origin::Remote;
  throw Error("bad_origin", "origin must be home_network or remote");
}

std::string_view verb_name(const Verb& v) {
  switch (v.index()) {
    case 0: return "set_value";
    case 1: return "switch";
    case 2: return "install_app";
    case 3: return "add_device";
    case 4: return "remove_device";
    case 5: return "set_code";
  }
  return "?";
}

std::string_view to_string(DenialReason r) {
  switch (r) {
    case DenialReason::None: return "none";
    case DenialReason::UnknownActor: return "unknown_actor";
    case DenialReason::Expired: return "expired";
    case DenialReason::PendingResolution: return "pending_resolution";
    case DenialReason::DevicePermission: return "device_permission";
    case DenialReason::AppInstall: return "app_install";
    case DenialReason::Restricted: return "restricted";
    case DenialReason::OutsidePermit: return "outside_permit";
    case DenialReason::PriorityEscalation: return "priority_escalation";
  }
  return "?";
}

std::string_view to_string(Decision::Verdict v) { return v == Decision::Verdict::Allow ? "allow" : "deny"; }

std::optional<ThreatTag> detect_threat_class(const DeviceCommand&, const Decision::Verdict verdict,
                                             const DenialContext& ctx) {
  if (verdict == Decision::Verdict::Allow) return std::nullopt;
  switch (ctx.reason) {
    case DenialReason::UnknownActor:
    case DenialReason::Expired: return ThreatTag::T4;
    case DenialReason::DevicePermission: return ThreatTag::T3;
    case DenialReason::AppInstall: return ThreatTag::T2;
    case DenialReason::PriorityEscalation: return ThreatTag::T5;
    case DenialReason::Restricted:
      return ctx.actor_temporary && ctx.time_bound ? ThreatTag::T4 : ThreatTag::T1;
    case DenialReason::OutsidePermit:
      if (ctx.actor_temporary) return ThreatTag::T4;
      return std::nullopt;
    case DenialReason::PendingResolution:
    case DenialReason::None: return std::nullopt;
  }
  return std::nullopt;
}

namespace {

enum class Truth { Holds, Fails, Unknown };

struct Facts {
  const DeviceCommand& cmd;
  const PresenceMap& presence;
  Instant now;

  Presence presence_of(const UserId& u) const {
    if (u == cmd.actor && cmd.origin) return *cmd.origin == Origin::HomeNetwork ? Presence::Home : Presence::Away;
    auto it = presence.find(u);
    return it == presence.end() ? Presence::Away : it->second;
  }

  Truth eval(const Condition& c) const {
    std::int64_t v = 0;
    if (c.is_presence()) {
      v = static_cast<std::int64_t>(presence_of(c.presence_of));
    } else if (std::holds_alternative<TimeWindow>(c.predicate)) {
      v = minute_of_day(now);
    } else {
      const auto* sv = std::get_if<SetValue>(&cmd.verb);
      if (!sv || sv->attribute != c.attribute) return Truth::Unknown;
      v = sv->value;
    }
    return condition_holds(c, v) ? Truth::Holds : Truth::Fails;
  }
};

bool is_gate(const AbacRule& r, const Condition& c) {
  return c.is_presence() && (!r.subject || c.presence_of != *r.subject);
}

void add_notice(std::vector<Notice>& out, const UserId& to, const std::string& msg) {
  for (const auto& n : out)
    if (n.recipient == to) return;
  out.push_back({to, msg});
}

}  // namespace

Decision authorize(const DeviceCommand& cmd, const RuleTable& rules, const PriorityTable& priorities,
                   const PresenceMap& presence, Instant now, const DeviceRoster& devices,
                   const EnforcementConfig& config) {
  const bool needs_device = !std::holds_alternative<AddDevice>(cmd.verb) && !std::holds_alternative<InstallApp>(cmd.verb);
  if (needs_device && !devices.count(cmd.device)) throw Error("unknown_device", "unknown device '" + cmd.device + "'");

  Decision d;
  const UserEntry* actor = priorities.find(cmd.actor);
  DenialContext ctx;
  ctx.actor_temporary = actor && actor->expiry.has_value();
  const AbacRule* matched = nullptr;

  auto deny = [&](DenialReason reason, std::string detail) {
    d.verdict = Decision::Verdict::Deny;
    d.reason = reason;
    d.detail = std::move(detail);
    ctx.reason = reason;
    if (matched) d.matched_rule = matched->id;
    d.threat = detect_threat_class(cmd, d.verdict, ctx);
    const std::string what = std::string(verb_name(cmd.verb)) + (cmd.device.empty() ? "" : " on " + cmd.device);
    const std::string tag = d.threat ? std::string(to_string(*d.threat)) + " " : "";
    const std::string msg = tag + "denied " + cmd.actor + ": " + what + " (" + d.detail + ")";
    add_notice(d.notifications, cmd.actor, msg);
    if (!d.threat) return d;
    if (matched) {
      for (const auto& o : matched->owners) add_notice(d.notifications, o, msg);
    } else {
      for (const auto& a : priorities.admins()) add_notice(d.notifications, a, msg);
    }
    if ((*d.threat == ThreatTag::T4 || *d.threat == ThreatTag::T5) && actor && actor->commander &&
        priorities.contains(*actor->commander))
      add_notice(d.notifications, *actor->commander, msg);
    return d;
  };

  if (!actor) return deny(DenialReason::UnknownActor, "not an authorized user");
  if (actor->expiry && *actor->expiry <= now) return deny(DenialReason::Expired, "validity expired");
  if (actor->pending) return deny(DenialReason::PendingResolution, "priority assignment awaits resolution");

  const bool structural = std::holds_alternative<AddDevice>(cmd.verb) ||
                          std::holds_alternative<RemoveDevice>(cmd.verb) || std::holds_alternative<SetCode>(cmd.verb);
  if (structural && !actor->device_perm) return deny(DenialReason::DevicePermission, "no device permission");
  if (std::holds_alternative<InstallApp>(cmd.verb)) {
    if (actor->priority > config.app_install_max_class)
      return deny(DenialReason::AppInstall, "class " + std::to_string(actor->priority) + " may not install apps");
    return d;
  }
  if (std::holds_alternative<AddDevice>(cmd.verb) || std::holds_alternative<RemoveDevice>(cmd.verb)) return d;

  const Facts facts{cmd, presence, now};
  const auto applicable = rules.lookup(cmd.actor, cmd.device);
  for (const auto* r : applicable) {
    if (r->effect != Effect::Deny) continue;
    const bool fires = std::all_of(r->constraints.begin(), r->constraints.end(),
                                   [&](const Condition& c) { return facts.eval(c) == Truth::Holds; });
    if (!fires) continue;
    matched = r;
    ctx.time_bound = std::any_of(r->constraints.begin(), r->constraints.end(), [](const Condition& c) {
      return std::holds_alternative<TimeWindow>(c.predicate);
    });
    return deny(DenialReason::Restricted, "restricted by clause #" + std::to_string(to_underlying(r->id)));
  }
  for (const auto* r : applicable) {
    if (r->effect != Effect::Permit) continue;
    bool active = true;
    for (const auto& c : r->constraints)
      if (is_gate(*r, c) && facts.eval(c) != Truth::Holds) active = false;
    if (!active) continue;
    for (const auto& c : r->constraints) {
      if (is_gate(*r, c)) continue;
      if (facts.eval(c) == Truth::Fails) {
        matched = r;
        return deny(DenialReason::OutsidePermit, "outside " + c.key() + " allowed by clause #" +
                                                     std::to_string(to_underlying(r->id)));
      }
    }
  }
  return d;
}

IntervalSet effective_region(const UserId& actor, const DeviceId& device, const std::string& attribute,
                             const IntervalSet& domain, const RuleTable& rules, const PriorityTable& priorities,
                             const PresenceMap& presence, Instant now, const DeviceRoster& devices,
                             std::optional<Origin> origin) {
  std::vector<Interval> ok;
  for (const auto& part : domain.parts())
    for (auto v = part.lo; v <= part.hi; ++v) {
      DeviceCommand cmd{actor, device, SetValue{attribute, v}, now, origin};
      if (authorize(cmd, rules, priorities, presence, now, devices).allowed()) ok.push_back({v, v});
    }
  return IntervalSet(std::move(ok));
}

}  // namespace homeguard
