#include "homeguard/codec.hpp"

#include <set>

namespace homeguard {

namespace {

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> opt_get(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return it->get<T>();
}

json ids(const std::vector<ClauseId>& v) {
  json a = json::array();
  for (auto id : v) a.push_back(to_underlying(id));
  return a;
}

std::vector<ClauseId> ids_from(const json& j) {
  std::vector<ClauseId> out;
  for (const auto& x : j) out.push_back(ClauseId{x.get<std::uint64_t>()});
  return out;
}

json opt_clause_id(const std::optional<ClauseId>& v) { return v ? json(to_underlying(*v)) : json(nullptr); }

}  // namespace

std::string canonical(const json& j) { return j.dump(); }

void to_json(json& j, const IntervalSet& v) {
  j = json::array();
  for (const auto& p : v.parts()) j.push_back({p.lo, p.hi});
}

void from_json(const json& j, IntervalSet& v) {
  std::vector<Interval> parts;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2) throw Error("bad_document", "interval must be [lo, hi]");
    parts.push_back({p[0].get<std::int64_t>(), p[1].get<std::int64_t>()});
  }
  v = IntervalSet(std::move(parts));
}

void to_json(json& j, const ClockSpan& v) { j = format_clock(v.start_minute) + "-" + format_clock(v.end_minute); }

void from_json(const json& j, ClockSpan& v) {
  const auto s = j.get<std::string>();
  const auto dash = s.find('-');
  if (dash == std::string::npos) throw Error("bad_document", "time window must look like 6:00am-9:00pm");
  v = ClockSpan{parse_clock(s.substr(0, dash)), parse_clock(s.substr(dash + 1))};
}

void to_json(json& j, const Condition& v) {
  j = json{{"attribute", v.attribute}};
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        j["op"] = p.excluded ? "notin" : "in";
        if constexpr (std::is_same_v<T, NumericRange>) {
          j["ranges"] = p.ranges;
        } else if constexpr (std::is_same_v<T, TimeWindow>) {
          j["windows"] = p.windows;
        } else {
          json vals = json::array();
          for (auto x : p.values) vals.push_back(std::string(to_string(x)));
          j["values"] = vals;
          j["of"] = v.presence_of;
        }
      },
      v.predicate);
}

void from_json(const json& j, Condition& v) {
  v.attribute = j.at("attribute").get<std::string>();
  const auto op = get_or<std::string>(j, "op", "in");
  if (op != "in" && op != "notin") throw Error("bad_document", "condition op must be in or notin");
  const bool ex = op == "notin";
  v.presence_of.clear();
  if (j.contains("ranges")) {
    v.predicate = NumericRange{j.at("ranges").get<IntervalSet>(), ex};
  } else if (j.contains("windows")) {
    v.predicate = TimeWindow{j.at("windows").get<std::vector<ClockSpan>>(), ex};
  } else if (j.contains("values")) {
    std::set<Presence> vals;
    for (const auto& x : j.at("values")) vals.insert(presence_from_string(x.get<std::string>()));
    v.predicate = PresenceSet{{vals.begin(), vals.end()}, ex};
    v.presence_of = j.at("of").get<std::string>();
  } else {
    throw Error("bad_document", "condition needs ranges, windows or values");
  }
}

void to_json(json& j, const ConditionSet& v) {
  j = json::array();
  for (const auto& c : v) j.push_back(c);
}

void from_json(const json& j, ConditionSet& v) { v = ConditionSet(j.get<std::vector<Condition>>()); }

void to_json(json& j, const PolicyClause& v) {
  j = json{{"id", to_underlying(v.id)},
           {"owners", v.owners},
           {"subject", opt(v.subject)},
           {"exempt", v.exempt},
           {"device", v.device},
           {"conditions", v.conditions},
           {"action", std::string(to_string(v.action))},
           {"expiry", opt(v.expiry)},
           {"sources", ids(v.sources)},
           {"text", render_clause(clause_to_ast(v))}};
}

void from_json(const json& j, PolicyClause& v) {
  v.id = ClauseId{j.at("id").get<std::uint64_t>()};
  v.owners = j.at("owners").get<std::vector<UserId>>();
  v.subject = opt_get<UserId>(j, "subject");
  v.exempt = get_or<std::vector<UserId>>(j, "exempt", {});
  v.device = j.at("device").get<std::string>();
  v.conditions = j.at("conditions").get<ConditionSet>();
  v.action = action_from_string(j.at("action").get<std::string>());
  v.expiry = opt_get<Instant>(j, "expiry");
  v.sources = j.contains("sources") ? ids_from(j.at("sources")) : std::vector<ClauseId>{};
  if (v.owners.empty()) throw Error("bad_document", "clause needs at least one owner");
}

void to_json(json& j, const UserRecord& v) {
  j = json{{"commander", v.commander}, {"new_user", v.new_user}, {"priority", v.priority},
           {"device_perm", v.device_perm}, {"validity", opt(v.validity)}, {"role", v.role}};
}

void from_json(const json& j, UserRecord& v) {
  v.commander = j.at("commander").get<std::string>();
  v.new_user = j.at("new_user").get<std::string>();
  v.priority = j.at("priority").get<int>();
  v.device_perm = get_or<bool>(j, "device_perm", false);
  v.validity = opt_get<Instant>(j, "validity");
  v.role = get_or<std::string>(j, "role", "");
}

void to_json(json& j, const PendingAssignment& v) {
  j = json{{"commander", v.commander}, {"priority", v.priority}, {"device_perm", v.device_perm},
           {"expiry", opt(v.expiry)}};
}

void from_json(const json& j, PendingAssignment& v) {
  v.commander = j.at("commander").get<std::string>();
  v.priority = j.at("priority").get<int>();
  v.device_perm = j.at("device_perm").get<bool>();
  v.expiry = opt_get<Instant>(j, "expiry");
}

void to_json(json& j, const UserEntry& v) {
  j = json{{"priority", v.priority}, {"device_perm", v.device_perm}, {"expiry", opt(v.expiry)},
           {"commander", opt(v.commander)}, {"role", v.role}, {"pending", opt(v.pending)}};
}

void from_json(const json& j, UserEntry& v) {
  v.priority = j.at("priority").get<int>();
  v.device_perm = j.at("device_perm").get<bool>();
  v.expiry = opt_get<Instant>(j, "expiry");
  v.commander = opt_get<UserId>(j, "commander");
  v.role = get_or<std::string>(j, "role", "");
  v.pending = opt_get<PendingAssignment>(j, "pending");
}

void to_json(json& j, const PriorityTable& v) {
  j = json::object();
  for (const auto& [id, e] : v.entries()) j[id] = e;
}

void from_json(const json& j, PriorityTable& v) {
  v = PriorityTable{};
  for (const auto& [id, e] : j.items()) v.put(id, e.get<UserEntry>());
}

void to_json(json& j, const DeviceDescriptor& v) {
  json va = nullptr;
  if (v.value_attribute)
    va = json{{"name", v.value_attribute->name}, {"lo", v.value_attribute->lo}, {"hi", v.value_attribute->hi},
              {"unit", v.value_attribute->unit}};
  j = json{{"id", v.id}, {"kind", std::string(to_string(v.kind))}, {"is_binary", v.is_binary},
           {"value_attribute", va}, {"removable_requires_perm", v.removable_requires_perm}};
}

void from_json(const json& j, DeviceDescriptor& v) {
  // kind defaults fill anything the document leaves out
  v = make_device(j.at("id").get<std::string>(), device_kind_from_string(j.at("kind").get<std::string>()));
  if (j.contains("is_binary")) v.is_binary = j.at("is_binary").get<bool>();
  if (j.contains("value_attribute")) {
    const auto& va = j.at("value_attribute");
    if (va.is_null()) {
      v.value_attribute.reset();
    } else {
      v.value_attribute = ValueAttribute{va.at("name").get<std::string>(), va.at("lo").get<std::int64_t>(),
                                         va.at("hi").get<std::int64_t>(), get_or<std::string>(va, "unit", "")};
    }
  }
  v.removable_requires_perm = get_or<bool>(j, "removable_requires_perm", true);
  if (v.is_binary && v.value_attribute)
    throw Error("bad_document", "device '" + v.id + "' cannot be binary and carry a value attribute");
}

void to_json(json& j, const DevicePolicyArray& v) {
  json c2 = nullptr;
  if (v.value) c2 = json::array({v.value->lo, v.value->hi});
  j = json{{"U", v.user}, {"D", v.device}, {"C1", opt(v.time)}, {"C2", c2}, {"R", v.restricted.value_or("0")},
           {"attribute", v.value_attribute}};
}

void from_json(const json& j, DevicePolicyArray& v) {
  v.user = j.at("U").get<std::string>();
  v.device = j.at("D").get<std::string>();
  v.time = opt_get<ClockSpan>(j, "C1");
  v.value.reset();
  if (j.contains("C2") && !j.at("C2").is_null()) {
    const auto& c2 = j.at("C2");
    if (!c2.is_array() || c2.size() != 2) throw Error("bad_document", "C2 must be [lo, hi]");
    v.value = Interval{c2[0].get<std::int64_t>(), c2[1].get<std::int64_t>()};
  }
  v.restricted = opt_get<UserId>(j, "R");
  v.value_attribute = get_or<std::string>(j, "attribute", "");
}

void to_json(json& j, const AttributeOverlap& v) {
  j = json{{"attribute", v.attribute}, {"region_i", v.region_i}, {"region_j", v.region_j}, {"overlap", v.overlap}};
}

void from_json(const json& j, AttributeOverlap& v) {
  v.attribute = j.at("attribute").get<std::string>();
  v.region_i = j.at("region_i").get<IntervalSet>();
  v.region_j = j.at("region_j").get<IntervalSet>();
  v.overlap = j.at("overlap").get<bool>();
}

void to_json(json& j, const ConflictReport& v) {
  j = json{{"i", to_underlying(v.i)}, {"j", to_underlying(v.j)}, {"class", std::string(to_string(v.cls))},
           {"detail", v.detail}};
}

void from_json(const json& j, ConflictReport& v) {
  v.i = ClauseId{j.at("i").get<std::uint64_t>()};
  v.j = ClauseId{j.at("j").get<std::uint64_t>()};
  v.cls = conflict_class_from_string(j.at("class").get<std::string>());
  v.detail = j.at("detail").get<std::vector<AttributeOverlap>>();
}

void to_json(json& j, const DeferredPlan& v) {
  j = json{{"retire", ids(v.retire)}, {"scope", opt(v.scope)}, {"install", v.install}};
}

void from_json(const json& j, DeferredPlan& v) {
  v.retire = ids_from(j.at("retire"));
  v.scope = opt_get<UserId>(j, "scope");
  v.install = j.at("install").get<std::vector<PolicyClause>>();
}

void to_json(json& j, const NegotiationSession& v) {
  json responses = json::object();
  for (const auto& [p, r] : v.responses) responses[p] = std::string(to_string(r));
  j = json{{"id", to_underlying(v.id)},
           {"report", v.report},
           {"proposal", v.proposal},
           {"proposed", v.proposed},
           {"held", opt(v.held)},
           {"responses", responses},
           {"state", std::string(to_string(v.state))},
           {"created_at", v.created_at},
           {"escalate_to", v.escalate_to},
           {"on_accept", v.on_accept}};
}

void from_json(const json& j, NegotiationSession& v) {
  v.id = SessionId{j.at("id").get<std::uint64_t>()};
  v.report = j.at("report").get<ConflictReport>();
  v.proposal = j.at("proposal").get<ConditionSet>();
  v.proposed = j.at("proposed").get<PolicyClause>();
  v.held = opt_get<PolicyClause>(j, "held");
  v.responses.clear();
  for (const auto& [p, r] : j.at("responses").items()) v.responses[p] = verdict_from_string(r.get<std::string>());
  v.state = session_state_from_string(j.at("state").get<std::string>());
  v.created_at = j.at("created_at").get<Instant>();
  v.escalate_to = j.at("escalate_to").get<std::string>();
  v.on_accept = j.at("on_accept").get<DeferredPlan>();
}

void to_json(json& j, const NegotiationOutcome& v) {
  j = json{{"kind", std::string(to_string(v.kind))},
           {"class", std::string(to_string(v.cls))},
           {"clause", opt(v.clause)},
           {"parties", v.parties},
           {"session", v.session ? json(to_underlying(*v.session)) : json(nullptr)},
           {"escalated_to", v.escalated_to},
           {"reason", v.reason},
           {"notices", v.notices}};
}

void to_json(json& j, const Notice& v) { j = json{{"recipient", v.recipient}, {"message", v.message}}; }

void from_json(const json& j, Notice& v) {
  v.recipient = j.at("recipient").get<std::string>();
  v.message = j.at("message").get<std::string>();
}

void to_json(json& j, const NotificationRecord& v) {
  j = json{{"seq", v.seq}, {"at", v.at}, {"recipient", v.notice.recipient}, {"message", v.notice.message}};
}

void from_json(const json& j, NotificationRecord& v) {
  v.seq = j.at("seq").get<std::uint64_t>();
  v.at = j.at("at").get<Instant>();
  v.notice = Notice{j.at("recipient").get<std::string>(), j.at("message").get<std::string>()};
}

void to_json(json& j, const DeviceCommand& v) {
  j = json{{"actor", v.actor}, {"device", v.device}, {"verb", std::string(verb_name(v.verb))}, {"at", v.timestamp},
           {"origin", v.origin ? json(std::string(to_string(*v.origin))) : json(nullptr)}};
  std::visit(
      [&](const auto& verb) {
        using T = std::decay_t<decltype(verb)>;
        if constexpr (std::is_same_v<T, SetValue>) {
          j["attribute"] = verb.attribute;
          j["value"] = verb.value;
        } else if constexpr (std::is_same_v<T, Switch>) {
          j["on"] = verb.on;
        } else if constexpr (std::is_same_v<T, InstallApp>) {
          j["app_id"] = verb.app_id;
          j["devices"] = verb.devices;
        } else if constexpr (std::is_same_v<T, AddDevice>) {
          j["kind"] = std::string(to_string(verb.kind));
        }
      },
      v.verb);
}

void from_json(const json& j, DeviceCommand& v) {
  v.actor = j.at("actor").get<std::string>();
  v.device = get_or<std::string>(j, "device", "");
  v.timestamp = get_or<Instant>(j, "at", 0);
  v.origin.reset();
  if (auto o = opt_get<std::string>(j, "origin")) v.origin = origin_from_string(*o);
  const auto verb = j.at("verb").get<std::string>();
  if (verb == "set_value") {
    v.verb = SetValue{j.at("attribute").get<std::string>(), j.at("value").get<std::int64_t>()};
  } else if (verb == "switch") {
    v.verb = Switch{get_or<bool>(j, "on", true)};
  } else if (verb == "install_app") {
    v.verb = InstallApp{get_or<std::string>(j, "app_id", ""), get_or<std::vector<DeviceId>>(j, "devices", {})};
  } else if (verb == "add_device") {
    v.verb = AddDevice{device_kind_from_string(get_or<std::string>(j, "kind", "sensor"))};
  } else if (verb == "remove_device") {
    v.verb = RemoveDevice{};
  } else if (verb == "set_code") {
    v.verb = SetCode{};
  } else {
    throw Error("bad_document", "unknown verb '" + verb + "'");
  }
}

void to_json(json& j, const Decision& v) {
  j = json{{"verdict", std::string(to_string(v.verdict))},
           {"matched_rule", opt_clause_id(v.matched_rule)},
           {"threat", v.threat ? json(std::string(to_string(*v.threat))) : json(nullptr)},
           {"reason", std::string(to_string(v.reason))},
           {"detail", v.detail},
           {"notifications", v.notifications}};
}

void from_json(const json& j, Decision& v) {
  v.verdict = j.at("verdict").get<std::string>() == "allow" ? Decision::Verdict::Allow : Decision::Verdict::Deny;
  v.matched_rule.reset();
  if (auto r = opt_get<std::uint64_t>(j, "matched_rule")) v.matched_rule = ClauseId{*r};
  v.threat.reset();
  if (auto t = opt_get<std::string>(j, "threat")) v.threat = threat_tag_from_string(*t);
  v.detail = get_or<std::string>(j, "detail", "");
  v.notifications = get_or<std::vector<Notice>>(j, "notifications", {});
}

void to_json(json& j, const AbacRule& v) {
  j = json{{"id", to_underlying(v.id)}, {"effect", std::string(to_string(v.effect))}, {"subject", opt(v.subject)},
           {"exempt", v.exempt}, {"resource", v.resource}, {"constraints", v.constraints},
           {"owners", v.owners}, {"sources", ids(v.sources)}, {"expiry", opt(v.expiry)}};
}

void to_json(json& j, const RuleTable& v) {
  j = json::array();
  for (const auto& r : v.rules()) j.push_back(r);
}

void to_json(json& j, const EngineState& v) {
  json devices = json::object();
  for (const auto& [id, d] : v.devices) devices[id] = d;
  json presence = json::object();
  for (const auto& [u, p] : v.presence) presence[u] = std::string(to_string(p));
  json active = json::array();
  for (const auto& [_, c] : v.active) active.push_back(c);
  json sessions = json::array();
  for (const auto& [_, s] : v.sessions) sessions.push_back(s);
  j = json{{"now", v.now},
           {"priorities", v.priorities},
           {"devices", devices},
           {"presence", presence},
           {"active", active},
           {"sessions", sessions},
           {"conflicts", v.conflicts},
           {"notifications", v.notifications},
           {"removed", v.removed},
           {"next_clause", v.next_clause},
           {"next_session", v.next_session}};
}

void from_json(const json& j, EngineState& v) {
  v = EngineState{};
  v.now = j.at("now").get<Instant>();
  v.priorities = j.at("priorities").get<PriorityTable>();
  for (const auto& [id, d] : j.at("devices").items()) v.devices[id] = d.get<DeviceDescriptor>();
  for (const auto& [u, p] : j.at("presence").items()) v.presence[u] = presence_from_string(p.get<std::string>());
  for (const auto& c : j.at("active")) {
    auto pc = c.get<PolicyClause>();
    v.active[pc.id] = pc;
  }
  for (const auto& s : j.at("sessions")) {
    auto ns = s.get<NegotiationSession>();
    v.sessions[ns.id] = ns;
  }
  v.conflicts = j.at("conflicts").get<std::vector<ConflictReport>>();
  v.notifications = j.at("notifications").get<std::vector<NotificationRecord>>();
  v.removed = j.at("removed").get<std::map<UserId, UserId>>();
  v.next_clause = j.at("next_clause").get<std::uint64_t>();
  v.next_session = j.at("next_session").get<std::uint64_t>();
}

void to_json(json& j, const AddUserReport& v) {
  j = json{{"ok", v.ok},
           {"outcome", v.ok ? json(std::string(to_string(v.outcome))) : json(nullptr)},
           {"error", v.error.empty() ? json(nullptr) : json(v.error)},
           {"message", v.message},
           {"threat", v.threat ? json(std::string(to_string(*v.threat))) : json(nullptr)},
           {"notifications", v.notices}};
}

void to_json(json& j, const InstallStep& v) { j = json{{"conflict", v.report}, {"outcome", v.outcome}}; }

void to_json(json& j, const SubmitReport& v) {
  json sessions = json::array();
  for (auto s : v.sessions) sessions.push_back(to_underlying(s));
  j = json{{"submitted", v.submitted}, {"steps", v.steps}, {"sessions", sessions}};
}

void to_json(json& j, const ParseDiagnostic& v) {
  j = json{{"line", v.line}, {"column", v.column}, {"message", v.message},
           {"severity", v.severity == ParseDiagnostic::Severity::Error ? "error" : "warning"}};
}

}  // namespace homeguard
