#include "homeguard/engine.hpp"

#include <algorithm>
#include <set>

namespace homeguard {

namespace {

std::string clause_ref(ClauseId id) { return "#" + std::to_string(to_underlying(id)); }

}  // namespace

Engine::Engine(EngineConfig config) : config_(config) {}

DomainCatalog Engine::domains() const {
  auto d = DomainCatalog::defaults();
  for (const auto& [_, dev] : state_.devices) d.learn(dev);
  return d;
}

void Engine::restore(EngineState s) {
  state_ = std::move(s);
  derived_.clear();
  rebuild();
}

void Engine::notify(const Notice& n) {
  NotificationRecord r{state_.notifications.size() + 1, state_.now, n};
  state_.notifications.push_back(r);
  derived_.push_back({"NotificationEmitted", n.recipient + ": " + n.message, {r.seq}});
}

void Engine::notify_all(const std::vector<Notice>& ns) {
  for (const auto& n : ns) notify(n);
}

std::vector<DerivedEvent> Engine::drain_derived() { return std::exchange(derived_, {}); }

void Engine::rebuild() {
  std::vector<PolicyClause> all;
  all.reserve(state_.active.size());
  for (const auto& [_, c] : state_.active) all.push_back(c);
  rules_ = rebuild_table(all);
}

bool Engine::device_is_binary(const DeviceId& d) const {
  auto it = state_.devices.find(d);
  return it != state_.devices.end() && it->second.is_binary;
}

void Engine::set_time(Instant t) {
  if (t > state_.now) state_.now = t;
  sweep();
  for (auto& [id, s] : state_.sessions) {
    if (s.terminal()) continue;
    auto next = expire_if_stale(s, state_.now, config_.session_timeout);
    if (next.state != s.state) {
      s = next;
      close_session(s, nullptr);
    }
  }
}

void Engine::bootstrap(const UserId& owner) {
  state_.priorities = homeguard::bootstrap(state_.priorities, owner);
  state_.presence[owner] = Presence::Away;
  derived_.push_back({"UserAdded", owner + " bootstrapped as owner", {}});
}

AddUserReport Engine::add_user(const UserRecord& rec) {
  AddUserReport rep;
  try {
    auto res = homeguard::add_user(rec, state_.priorities, state_.now);
    state_.priorities = std::move(res.table);
    rep.ok = true;
    rep.outcome = res.outcome;
    std::string msg;
    switch (res.outcome) {
      case AddOutcome::Inserted:
      case AddOutcome::Reassigned:
        msg = rec.new_user + " now class " + std::to_string(state_.priorities.class_of(rec.new_user)) + " (added by " +
              rec.commander + ")";
        state_.presence.try_emplace(rec.new_user, Presence::Away);
        state_.removed.erase(rec.new_user);
        break;
      case AddOutcome::KeptExisting:
        msg = "assignment of " + rec.new_user + " by " + rec.commander + " ignored: an outranking assignment stands";
        break;
      case AddOutcome::Pending:
        msg = "equal-rank commanders disagree on the class of " + rec.new_user + "; please fix a priority level";
        break;
    }
    rep.message = msg;
    for (const auto& u : res.notify) rep.notices.push_back({u, msg});
    if (res.outcome == AddOutcome::Reassigned && res.notify.empty()) rep.notices.push_back({rec.commander, msg});
    derived_.push_back({"UserAdded", rec.new_user + " " + std::string(to_string(res.outcome)), {}});
  } catch (const Error& e) {
    rep.ok = false;
    rep.error = e.code();
    rep.message = e.what();
    if (e.code() == "AssignAboveOwnAuthority" || e.code() == "DevicePermEscalation") {
      rep.threat = ThreatTag::T5;
      const std::string msg = "T5 denied " + rec.commander + ": add " + rec.new_user + " (" + e.what() + ")";
      std::set<UserId> to{rec.commander};
      for (const auto& a : state_.priorities.admins()) to.insert(a);
      if (const auto* c = state_.priorities.find(rec.commander); c && c->commander) to.insert(*c->commander);
      for (const auto& u : to) rep.notices.push_back({u, msg});
    }
  }
  notify_all(rep.notices);
  return rep;
}

void Engine::purge_user(const UserId& user) {
  for (auto it = state_.active.begin(); it != state_.active.end();) {
    auto& c = it->second;
    const bool owned = std::find(c.owners.begin(), c.owners.end(), user) != c.owners.end();
    if (owned || (c.subject && *c.subject == user)) {
      derived_.push_back({"RuleRemoved", describe(c), {to_underlying(c.id)}});
      it = state_.active.erase(it);
      continue;
    }
    std::erase(c.exempt, user);
    ++it;
  }
  for (auto& [_, s] : state_.sessions) {
    if (!s.terminal() && s.responses.count(user)) {
      s.state = SessionState::Escalated;
      close_session(s, nullptr);
    }
  }
  state_.presence.erase(user);
  rebuild();
}

void Engine::remove_user(const UserId& user, const UserId& actor) {
  const auto& target = state_.priorities.at(user);
  const auto* a = state_.priorities.find(actor);
  if (!a) throw Error("forbidden", "unknown actor '" + actor + "'");
  const bool commander = target.commander && *target.commander == actor;
  if (!commander && !(a->priority < target.priority))
    throw Error("forbidden", "'" + actor + "' may not remove '" + user + "'");
  if (target.priority == 0 && state_.priorities.admins().size() == 1)
    throw Error("forbidden", "cannot remove the last owner");
  state_.removed[user] = target.commander.value_or("");
  state_.priorities.erase(user);
  purge_user(user);
  derived_.push_back({"UserRemoved", user + " removed by " + actor, {}});
  notify({user, "you were removed by " + actor});
}

void Engine::resolve_user(const UserId& user, const UserId& resolver, int priority) {
  state_.priorities = resolve_pending(state_.priorities, user, resolver, priority, state_.now);
  derived_.push_back({"UserResolved", user + " fixed at class " + std::to_string(priority), {}});
  const auto& e = state_.priorities.at(user);
  std::set<UserId> to{resolver, user};
  if (e.commander) to.insert(*e.commander);
  for (const auto& u : to) notify({u, user + " fixed at class " + std::to_string(priority) + " by " + resolver});
}

std::vector<UserId> Engine::sweep() {
  auto [table, removed] = remove_expired(state_.priorities, state_.now);
  if (removed.empty()) return removed;
  for (const auto& u : removed) {
    const auto& e = state_.priorities.at(u);
    state_.removed[u] = e.commander.value_or("");
  }
  state_.priorities = std::move(table);
  for (const auto& u : removed) {
    purge_user(u);
    derived_.push_back({"UserRemoved", u + " expired", {}});
    const std::string msg = u + " removed: validity expired";
    std::set<UserId> to;
    if (const auto& c = state_.removed[u]; !c.empty() && state_.priorities.contains(c)) to.insert(c);
    for (const auto& a : state_.priorities.admins()) to.insert(a);
    for (const auto& r : to) notify({r, msg});
  }
  return removed;
}

void Engine::register_device(const DeviceDescriptor& d) {
  if (d.id.empty()) throw Error("bad_device", "device id is empty");
  if (state_.devices.count(d.id)) throw Error("device_exists", "device '" + d.id + "' already exists");
  state_.devices[d.id] = d;
  derived_.push_back({"DeviceAdded", d.id, {}});
}

Decision Engine::add_device(const UserId& actor, const DeviceDescriptor& d) {
  auto dec = command(DeviceCommand{actor, d.id, AddDevice{d.kind}, state_.now, std::nullopt});
  if (dec.allowed()) register_device(d);
  return dec;
}

Decision Engine::remove_device(const UserId& actor, const DeviceId& id) {
  if (!state_.devices.count(id)) throw Error("unknown_device", "unknown device '" + id + "'");
  auto dec = command(DeviceCommand{actor, id, RemoveDevice{}, state_.now, std::nullopt});
  if (!dec.allowed()) return dec;
  state_.devices.erase(id);
  for (auto it = state_.active.begin(); it != state_.active.end();)
    it = it->second.device == id ? state_.active.erase(it) : std::next(it);
  rebuild();
  derived_.push_back({"DeviceRemoved", id + " removed by " + actor, {}});
  return dec;
}

Decision Engine::command(DeviceCommand cmd) {
  cmd.timestamp = state_.now;
  auto d = authorize(cmd, rules_, state_.priorities, state_.presence, state_.now, state_.devices, config_.enforcement);
  // an unknown actor may be a removed user; its old commander hears about it
  if (!d.allowed() && d.reason == DenialReason::UnknownActor) {
    if (auto it = state_.removed.find(cmd.actor); it != state_.removed.end() && !it->second.empty() &&
                                                  state_.priorities.contains(it->second)) {
      const std::string msg = d.notifications.front().message;
      if (std::none_of(d.notifications.begin(), d.notifications.end(),
                       [&](const Notice& n) { return n.recipient == it->second; }))
        d.notifications.push_back({it->second, msg});
    }
  }
  derived_.push_back({"CommandDecided",
                      cmd.actor + " " + std::string(verb_name(cmd.verb)) + " " + cmd.device + " -> " +
                          std::string(to_string(d.verdict)) + (d.threat ? " " + std::string(to_string(*d.threat)) : ""),
                      {}});
  notify_all(d.notifications);
  if (!d.allowed() && d.reason == DenialReason::Expired) {
    // an expired actor is removed on first contact
    const auto& e = state_.priorities.at(cmd.actor);
    state_.removed[cmd.actor] = e.commander.value_or("");
    state_.priorities.erase(cmd.actor);
    purge_user(cmd.actor);
    derived_.push_back({"UserRemoved", cmd.actor + " expired", {}});
  }
  return d;
}

void Engine::set_presence(const UserId& user, Presence p) {
  (void)state_.priorities.at(user);
  state_.presence[user] = p;
}

std::vector<PolicyClause> Engine::policies() const {
  std::vector<PolicyClause> out;
  for (const auto& [_, c] : state_.active) out.push_back(c);
  return out;
}

std::vector<NotificationRecord> Engine::notifications_since(std::uint64_t seq) const {
  std::vector<NotificationRecord> out;
  for (const auto& n : state_.notifications)
    if (n.seq > seq) out.push_back(n);
  return out;
}

std::vector<InstallStep> Engine::install(PolicyClause candidate) {
  const auto doms = domains();
  std::vector<ClauseId> snapshot;
  for (const auto& [id, _] : state_.active) snapshot.push_back(id);

  struct Work {
    PolicyClause clause;
    std::size_t from;
  };
  std::vector<Work> queue{{std::move(candidate), 0}};
  std::vector<InstallStep> steps;

  while (!queue.empty()) {
    Work w = std::move(queue.front());
    queue.erase(queue.begin());
    if (to_underlying(w.clause.id) == 0) w.clause.id = ClauseId{state_.next_clause++};
    bool alive = true;
    for (std::size_t k = w.from; k < snapshot.size() && alive; ++k) {
      auto it = state_.active.find(snapshot[k]);
      if (it == state_.active.end()) continue;
      const PolicyClause existing = it->second;
      auto report = examine(existing, w.clause, state_.priorities, doms);
      if (!report) continue;
      const PolicyClause& ci = report->i == existing.id ? existing : w.clause;
      const PolicyClause& cj = report->i == existing.id ? w.clause : existing;
      auto outcome = negotiate(*report, ci, cj, state_.priorities, device_is_binary(existing.device), doms);
      state_.conflicts.push_back(*report);
      derived_.push_back({"ConflictDetected",
                          std::string(to_string(report->cls)) + " " + clause_ref(report->i) + " " +
                              clause_ref(report->j) + " -> " + std::string(to_string(outcome.kind)),
                          {to_underlying(report->i), to_underlying(report->j)}});

      if (auto e = outcome.edits.find(existing.id); e != outcome.edits.end()) {
        state_.active.erase(existing.id);
        for (auto c : e->second) {
          if (to_underlying(c.id) == 0) c.id = ClauseId{state_.next_clause++};
          state_.active[c.id] = c;
        }
      }
      if (outcome.kind == NegotiationOutcome::Kind::Proposal) {
        NegotiationSession s;
        s.id = SessionId{state_.next_session++};
        s.report = *report;
        s.proposed = *outcome.clause;
        s.proposal = outcome.clause->conditions;
        if (report->cls == ConflictClass::HCC) s.held = w.clause;
        for (const auto& p : outcome.parties) s.responses[p] = Verdict::Pending;
        s.created_at = state_.now;
        s.escalate_to = outcome.escalated_to.empty() ? state_.priorities.top_authority() : outcome.escalated_to;
        s.on_accept = outcome.on_accept;
        outcome.session = s.id;
        derived_.push_back({"SessionOpened", describe(s.proposed), {to_underlying(s.id)}});
        state_.sessions[s.id] = std::move(s);
      }
      notify_all(outcome.notices);

      if (auto e = outcome.edits.find(w.clause.id); e != outcome.edits.end()) {
        alive = false;
        for (auto c : e->second) queue.push_back({std::move(c), k + 1});
      }
      steps.push_back({*report, std::move(outcome)});
    }
    if (alive) {
      derived_.push_back({"RuleInstalled", describe(w.clause), {to_underlying(w.clause.id)}});
      state_.active[w.clause.id] = w.clause;
    }
  }
  rebuild();
  return steps;
}

SubmitReport Engine::install_all(std::vector<PolicyClause> clauses) {
  SubmitReport rep;
  rep.submitted = clauses;
  for (auto& c : clauses) {
    auto steps = install(std::move(c));
    for (auto& s : steps) {
      if (s.outcome.session) rep.sessions.push_back(*s.outcome.session);
      rep.steps.push_back(std::move(s));
    }
  }
  return rep;
}

SubmitReport Engine::submit_clauses(std::vector<ClauseAst> clauses) {
  ClauseIdAllocator ids(state_.next_clause);
  std::vector<PolicyClause> normalized;
  for (const auto& ast : clauses) {
    std::vector<PolicyClause> part;
    try {
      part = normalize(ast, state_.now, state_.priorities, ids);
    } catch (const Error& e) {
      throw SubmitError(e.code(), e.what());
    }
    for (auto& c : part) {
      if (!state_.devices.count(c.device))
        throw SubmitError("unknown_device", "clause names unknown device '" + c.device + "'");
      normalized.push_back(std::move(c));
    }
  }
  state_.next_clause = ids.peek();
  derived_.push_back({"PolicySubmitted", std::to_string(normalized.size()) + " clause(s)", {}});
  return install_all(std::move(normalized));
}

SubmitReport Engine::submit_text(const std::string& text, const std::string& origin) {
  auto parsed = parse_policy_set(PolicySource{text, origin});
  if (!parsed.ok()) {
    throw SubmitError("parse", parsed.diagnostics.front().format(origin), parsed.diagnostics);
  }
  return submit_clauses(std::move(parsed.clauses));
}

SubmitReport Engine::submit_arrays(const std::vector<DevicePolicyArray>& arrays) {
  std::vector<PolicyClause> clauses;
  std::uint64_t next = state_.next_clause;
  for (const auto& a : arrays) {
    PolicyClause c;
    try {
      c = clause_from_device_policy(a, ClauseId{next});
    } catch (const Error& e) {
      throw SubmitError(e.code(), e.what());
    }
    if (!state_.priorities.contains(a.user)) throw SubmitError("unknown_owner", "unknown policy owner '" + a.user + "'");
    if (!state_.devices.count(a.device)) throw SubmitError("unknown_device", "unknown device '" + a.device + "'");
    ++next;
    clauses.push_back(std::move(c));
  }
  state_.next_clause = next;
  derived_.push_back({"PolicySubmitted", std::to_string(clauses.size()) + " device polic(ies)", {}});
  return install_all(std::move(clauses));
}

std::vector<InstallStep> Engine::apply_plan(const DeferredPlan& plan) {
  for (const auto& id : plan.retire) {
    auto it = state_.active.find(id);
    if (it == state_.active.end()) continue;
    auto& c = it->second;
    if (c.is_general() && plan.scope) {
      if (std::find(c.exempt.begin(), c.exempt.end(), *plan.scope) == c.exempt.end()) {
        c.exempt.push_back(*plan.scope);
        std::sort(c.exempt.begin(), c.exempt.end());
      }
    } else {
      state_.active.erase(it);
    }
  }
  rebuild();
  std::vector<InstallStep> steps;
  for (auto c : plan.install) {
    c.id = ClauseId{0};
    auto s = install(std::move(c));
    steps.insert(steps.end(), s.begin(), s.end());
  }
  return steps;
}

void Engine::close_session(NegotiationSession& s, std::vector<InstallStep>* steps) {
  const auto parties = s.parties();
  const std::string ref = "session " + std::to_string(to_underlying(s.id));
  derived_.push_back({"SessionClosed", ref + " " + std::string(to_string(s.state)), {to_underlying(s.id)}});
  switch (s.state) {
    case SessionState::Agreed: {
      auto st = apply_plan(s.on_accept);
      if (steps) *steps = std::move(st);
      for (const auto& p : parties) notify({p, ref + " agreed: " + describe(s.proposed) + " installed"});
      break;
    }
    case SessionState::Rejected:
      for (const auto& p : parties) notify({p, ref + " rejected: the enforced clause stands"});
      break;
    case SessionState::Escalated: {
      std::set<UserId> to(parties.begin(), parties.end());
      to.insert(s.escalate_to);
      for (const auto& u : to) notify({u, ref + " escalated to " + s.escalate_to + " to decide the policy"});
      break;
    }
    case SessionState::Open: break;
  }
}

SessionReport Engine::respond(SessionId id, const UserId& party, Verdict verdict) {
  auto it = state_.sessions.find(id);
  if (it == state_.sessions.end()) throw Error("unknown_session", "unknown session " + std::to_string(to_underlying(id)));
  auto next = homeguard::respond(it->second, party, verdict);
  it->second = next;
  derived_.push_back({"SessionResponded", party + " " + std::string(to_string(verdict)), {to_underlying(id)}});
  SessionReport rep;
  if (it->second.terminal()) close_session(it->second, &rep.steps);
  rep.session = state_.sessions.at(id);
  return rep;
}

}  // namespace homeguard
