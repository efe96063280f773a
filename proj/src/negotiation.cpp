#include "homeguard/negotiation.hpp"

#include <algorithm>
#include <set>

namespace homeguard {

std::string_view to_string(NegotiationOutcome::Kind k) {
  switch (k) {
    case NegotiationOutcome::Kind::Resolved: return "Resolved";
    case NegotiationOutcome::Kind::Proposal: return "Proposal";
    case NegotiationOutcome::Kind::Escalated: return "Escalated";
  }
  return "?";
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Pending: return "pending";
    case Verdict::Accept: return "accept";
    case Verdict::Reject: return "reject";
  }
  return "?";
}

Verdict verdict_from_string(std::string_view s) {
  if (s == "accept") return Verdict::Accept;
  if (s == "reject") return Verdict::Reject;
  if (s == "pending") return Verdict::Pending;
  throw Error("bad_verdict", "verdict must be accept or reject");
}

std::string_view to_string(SessionState s) {
  switch (s) {
    case SessionState::Open: return "open";
    case SessionState::Agreed: return "agreed";
    case SessionState::Rejected: return "rejected";
    case SessionState::Escalated: return "escalated";
  }
  return "?";
}

SessionState session_state_from_string(std::string_view s) {
  for (auto st : {SessionState::Open, SessionState::Agreed, SessionState::Rejected, SessionState::Escalated})
    if (to_string(st) == s) return st;
  throw Error("bad_state", "unknown session state '" + std::string(s) + "'");
}

std::vector<UserId> NegotiationSession::parties() const {
  std::vector<UserId> out;
  for (const auto& [p, _] : responses) out.push_back(p);
  return out;
}

namespace {

std::vector<UserId> union_of(const std::vector<UserId>& a, const std::vector<UserId>& b) {
  std::set<UserId> s(a.begin(), a.end());
  s.insert(b.begin(), b.end());
  return {s.begin(), s.end()};
}

std::string owners_label(const PolicyClause& c) {
  std::string s;
  for (std::size_t k = 0; k < c.owners.size(); ++k) s += (k ? "+" : "") + c.owners[k];
  return s;
}

/// Narrows `conds` so the condition on `key` also satisfies `region`.
/// Returns false when nothing is left.
bool narrow(ConditionSet& conds, const Condition& shape, const IntervalSet& region, const DomainCatalog& domains) {
  const auto key = shape.key();
  IntervalSet current = domains.domain_of(shape);
  if (const auto* c = conds.find(key)) current = condition_region(*c, domains);
  const auto next = current.intersect(region);
  if (next.empty()) return false;
  auto cond = condition_from_region(shape.attribute, shape.presence_of, next, domains);
  conds.assign(simplest_condition(cond, domains));
  return true;
}

/// The loser loses only for `scope`. A general loser facing a specific scope
/// keeps applying to everyone else and hands `pieces` the scoped remainder.
std::vector<PolicyClause> yield(const PolicyClause& loser, const std::optional<UserId>& scope,
                                std::vector<PolicyClause> pieces) {
  std::vector<PolicyClause> out;
  if (loser.is_general() && scope) {
    PolicyClause kept = loser;
    if (std::find(kept.exempt.begin(), kept.exempt.end(), *scope) == kept.exempt.end()) {
      kept.exempt.push_back(*scope);
      std::sort(kept.exempt.begin(), kept.exempt.end());
    }
    out.push_back(std::move(kept));
  }
  for (auto& p : pieces) {
    p.subject = scope ? scope : loser.subject;
    if (p.subject) p.exempt.clear();
    out.push_back(std::move(p));
  }
  return out;
}

PolicyClause with_scope(PolicyClause c, const PolicyClause& a, const PolicyClause& b) {
  c.subject = shared_subject(a, b);
  c.exempt.clear();
  if (!c.subject) {
    std::set<UserId> ex(a.exempt.begin(), a.exempt.end());
    ex.insert(b.exempt.begin(), b.exempt.end());
    c.exempt.assign(ex.begin(), ex.end());
  }
  c.owners = union_of(a.owners, b.owners);
  c.sources = {std::min(a.id, b.id), std::max(a.id, b.id)};
  c.id = ClauseId{0};
  if (a.expiry && b.expiry) c.expiry = std::min(*a.expiry, *b.expiry);
  else c.expiry = a.expiry ? a.expiry : b.expiry;
  return c;
}

IntervalSet hull(const IntervalSet& r) { return r.empty() ? r : IntervalSet::single(r.min(), r.max()); }

std::int64_t floor_mid(std::int64_t a, std::int64_t b) {
  const auto s = a + b;
  return s >= 0 ? s / 2 : -((-s + 1) / 2);
}

void notify_all(NegotiationOutcome& o, const std::vector<UserId>& who, const std::string& msg) {
  for (const auto& u : who) o.notices.push_back({u, msg});
}

}  // namespace

std::optional<UserId> shared_subject(const PolicyClause& a, const PolicyClause& b) {
  if (a.subject) return a.subject;
  return b.subject;
}

std::vector<Condition> presence_gates(const PolicyClause& c) {
  std::vector<Condition> out;
  for (const auto& cond : c.conditions)
    if (cond.is_presence() && (!c.subject || cond.presence_of != *c.subject)) out.push_back(cond);
  return out;
}

std::vector<PolicyClause> residual(const PolicyClause& loser, const std::vector<Condition>& cut,
                                   const DomainCatalog& domains) {
  // NOT(g1 AND ... AND gk) as disjoint pieces: g1..g(m-1) hold and gm fails
  std::vector<PolicyClause> out;
  for (std::size_t m = 0; m < cut.size(); ++m) {
    PolicyClause piece = loser;
    piece.id = ClauseId{0};
    piece.sources = {loser.id};
    bool alive = true;
    for (std::size_t k = 0; k < m && alive; ++k)
      alive = narrow(piece.conditions, cut[k], condition_region(cut[k], domains), domains);
    if (alive) {
      const auto fails = condition_region(cut[m], domains).complement(domains.domain_of(cut[m]));
      alive = narrow(piece.conditions, cut[m], fails, domains);
    }
    if (alive) out.push_back(std::move(piece));
  }
  return out;
}

PolicyClause merge_soft(const PolicyClause& base, const PolicyClause& other, const DomainCatalog& domains) {
  PolicyClause m = with_scope(base, base, other);
  const bool same = base.action == other.action;
  for (const auto& c : other.conditions) {
    auto region = condition_region(c, domains);
    if (!same) region = region.complement(domains.domain_of(c));
    if (!narrow(m.conditions, c, region, domains))
      throw Error("empty_merge", "merged region on '" + c.key() + "' is empty");
  }
  // the base may already be unsatisfiable on a key the other clause leaves alone
  for (const auto& c : m.conditions)
    if (condition_region(c, domains).empty())
      throw Error("empty_merge", "merged region on '" + c.key() + "' is empty");
  return m;
}

ConditionSet average_conditions(const ConditionSet& ci, const ConditionSet& cj, const DomainCatalog& domains) {
  ConditionSet out;
  bool averaged = false;
  for (const auto& a : ci) {
    const auto* b = cj.find(a.key());
    if (!b || a.is_presence() || a.predicate.index() != b->predicate.index()) {
      out.insert(a);
      continue;
    }
    if (const auto* ta = std::get_if<TimeWindow>(&a.predicate)) {
      const auto& tb = std::get<TimeWindow>(b->predicate);
      if (ta->windows.size() == 1 && tb.windows.size() == 1 && ta->excluded == tb.excluded) {
        ClockSpan s{static_cast<int>(floor_mid(ta->windows[0].start_minute, tb.windows[0].start_minute)),
                    static_cast<int>(floor_mid(ta->windows[0].end_minute, tb.windows[0].end_minute))};
        out.insert(Condition{a.attribute, "", TimeWindow{{s}, ta->excluded}});
        averaged = true;
      } else {
        out.insert(a);
      }
      continue;
    }
    const auto ha = hull(condition_region(a, domains));
    const auto hb = hull(condition_region(*b, domains));
    if (ha.empty() || hb.empty()) {
      out.insert(a);
      continue;
    }
    const auto lo = floor_mid(ha.min(), hb.min());
    const auto hi = floor_mid(ha.max(), hb.max());
    out.insert(Condition{a.attribute, "", NumericRange{IntervalSet::single(lo, hi), false}});
    averaged = true;
  }
  for (const auto& b : cj)
    if (!ci.find(b.key())) out.insert(b);
  if (!averaged) throw Error("no_common_attribute", "no common numeric or time condition to average");
  return out;
}

NegotiationOutcome majority_vote(const std::vector<PolicyClause>& clauses, bool device_is_binary,
                                 const PriorityTable& table) {
  if (!device_is_binary) throw Error("not_binary", "majority vote needs a binary device");
  if (clauses.empty()) throw Error("no_clauses", "majority vote needs at least one clause");
  NegotiationOutcome o;
  o.cls = ConflictClass::HCC;
  std::size_t on = 0;
  for (const auto& c : clauses) on += c.action == Action::Demand;
  const std::size_t off = clauses.size() - on;
  std::vector<UserId> everyone;
  for (const auto& c : clauses) everyone = union_of(everyone, c.owners);
  if (on == off) {
    o.kind = NegotiationOutcome::Kind::Escalated;
    o.escalated_to = table.top_authority();
    o.reason = "vote tied " + std::to_string(on) + "-" + std::to_string(off);
    notify_all(o, union_of(everyone, {o.escalated_to}), "device vote tied; decision escalated to " + o.escalated_to);
    return o;
  }
  const Action wins = on > off ? Action::Demand : Action::Restrict;
  const PolicyClause* chosen = nullptr;
  for (const auto& c : clauses)
    if (c.action == wins && (!chosen || c.id < chosen->id)) chosen = &c;
  o.kind = NegotiationOutcome::Kind::Resolved;
  o.clause = *chosen;
  o.reason = "vote " + std::to_string(std::max(on, off)) + "-" + std::to_string(std::min(on, off));
  notify_all(o, everyone, "device vote decided for clause #" + std::to_string(to_underlying(chosen->id)));
  return o;
}

NegotiationOutcome negotiate(const ConflictReport& report, const PolicyClause& ci, const PolicyClause& cj,
                             const PriorityTable& table, bool device_is_binary, const DomainCatalog& domains) {
  if (report.cls == ConflictClass::None) throw Error("no_conflict", "nothing to negotiate");
  for (const auto* c : {&ci, &cj})
    for (const auto& o : c->owners) (void)table.at(o);

  NegotiationOutcome o;
  o.cls = report.cls;
  const auto scope = shared_subject(ci, cj);
  const PolicyClause& older = ci.id < cj.id ? ci : cj;
  const PolicyClause& newer = ci.id < cj.id ? cj : ci;
  const auto both = union_of(ci.owners, cj.owners);
  const std::string dev = ci.device;
  const int class_i = class_of_set(ci.owners, table);
  const int class_j = class_of_set(cj.owners, table);

  auto escalate = [&](const std::string& why) {
    o.kind = NegotiationOutcome::Kind::Escalated;
    o.escalated_to = table.top_authority();
    o.reason = why;
    o.edits[newer.id] = yield(newer, scope, {});
    notify_all(o, union_of(both, {o.escalated_to}),
               std::string(to_string(report.cls)) + " on " + dev + " escalated to " + o.escalated_to + ": " + why);
  };

  switch (report.cls) {
    case ConflictClass::HPC:
    case ConflictClass::SPC: {
      const PolicyClause& winner = class_i < class_j ? ci : cj;
      const PolicyClause& loser = class_i < class_j ? cj : ci;
      o.kind = NegotiationOutcome::Kind::Resolved;
      o.clause = winner;
      o.edits[loser.id] = yield(loser, scope, residual(loser, presence_gates(winner), domains));
      const std::string msg = std::string(to_string(report.cls)) + " on " + dev + ": clause of " +
                              owners_label(winner) + " enforced over " + owners_label(loser);
      notify_all(o, both, msg);
      if (report.cls == ConflictClass::SPC) {
        try {
          auto merged = merge_soft(winner, loser, domains);
          o.kind = NegotiationOutcome::Kind::Proposal;
          o.parties = winner.owners;
          o.on_accept = DeferredPlan{{winner.id}, scope, {merged}};
          o.clause = merged;
          notify_all(o, winner.owners, "common range proposed on " + dev + ": " + describe(merged));
        } catch (const Error&) {
          // nothing in common: the winner simply stands
        }
      }
      break;
    }
    case ConflictClass::HCC: {
      if (device_is_binary) {
        auto vote = majority_vote({older, newer}, true, table);
        if (vote.kind == NegotiationOutcome::Kind::Escalated) {
          escalate(vote.reason);
        } else {
          const PolicyClause& loser = vote.clause->id == older.id ? newer : older;
          o.kind = NegotiationOutcome::Kind::Resolved;
          o.clause = vote.clause;
          o.reason = vote.reason;
          o.edits[loser.id] = yield(loser, scope, residual(loser, presence_gates(*vote.clause), domains));
          o.notices = vote.notices;
        }
        break;
      }
      const PolicyClause& base = ci.action != cj.action ? (ci.action == Action::Demand ? ci : cj) : older;
      const PolicyClause& other = &base == &ci ? cj : ci;
      ConditionSet avg;
      try {
        avg = average_conditions(base.conditions, other.conditions, domains);
      } catch (const Error& e) {
        escalate(e.what());
        break;
      }
      PolicyClause proposed = with_scope(base, base, other);
      proposed.conditions = avg;
      o.kind = NegotiationOutcome::Kind::Proposal;
      o.clause = proposed;
      o.parties = both;
      o.escalated_to = table.top_authority();
      o.edits[newer.id] = yield(newer, scope, {});
      o.on_accept = DeferredPlan{{older.id}, scope, {proposed}};
      notify_all(o, both, "average proposed on " + dev + ": " + describe(proposed));
      break;
    }
    case ConflictClass::SCC: {
      const PolicyClause& base = ci.action != cj.action ? (ci.action == Action::Demand ? ci : cj) : older;
      const PolicyClause& other = &base == &ci ? cj : ci;
      PolicyClause merged;
      try {
        merged = merge_soft(base, other, domains);
      } catch (const Error& e) {
        escalate(e.what());
        break;
      }
      o.kind = NegotiationOutcome::Kind::Resolved;
      o.clause = merged;
      o.edits[older.id] = yield(older, scope, {});
      o.edits[newer.id] = yield(newer, scope, {merged});
      notify_all(o, both, "SCC on " + dev + ": merged into " + describe(merged));
      break;
    }
    case ConflictClass::RC: {
      const PolicyClause& restrict_clause = ci.action == Action::Restrict ? ci : cj;
      const PolicyClause& demand = ci.action == Action::Restrict ? cj : ci;
      o.kind = NegotiationOutcome::Kind::Resolved;
      o.clause = restrict_clause;
      o.edits[demand.id] = yield(demand, scope, residual(demand, restrict_clause.conditions.items(), domains));
      notify_all(o, demand.owners, "your policy on " + dev + " is restricted by " + owners_label(restrict_clause));
      notify_all(o, restrict_clause.owners,
                 "restriction on " + dev + " enforced over the demand of " + owners_label(demand));
      break;
    }
    case ConflictClass::None: break;
  }
  return o;
}

NegotiationSession respond(const NegotiationSession& session, const UserId& party, Verdict verdict) {
  if (session.terminal())
    throw Error("SessionClosed", "session " + std::to_string(to_underlying(session.id)) + " is " +
                                     std::string(to_string(session.state)));
  auto it = session.responses.find(party);
  if (it == session.responses.end()) throw Error("NotParty", "'" + party + "' is not a party to this session");
  if (it->second != Verdict::Pending) throw Error("AlreadyResponded", "'" + party + "' already responded");
  if (verdict == Verdict::Pending) throw Error("bad_verdict", "verdict must be accept or reject");
  NegotiationSession s = session;
  s.responses[party] = verdict;
  if (verdict == Verdict::Reject) {
    s.state = s.report.cls == ConflictClass::HCC ? SessionState::Escalated : SessionState::Rejected;
  } else if (std::all_of(s.responses.begin(), s.responses.end(),
                         [](const auto& kv) { return kv.second == Verdict::Accept; })) {
    s.state = SessionState::Agreed;
  }
  return s;
}

NegotiationSession expire_if_stale(const NegotiationSession& session, Instant now, Instant timeout) {
  if (session.terminal() || now - session.created_at < timeout) return session;
  NegotiationSession s = session;
  s.state = SessionState::Escalated;
  return s;
}

}  // namespace homeguard
