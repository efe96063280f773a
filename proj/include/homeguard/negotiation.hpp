#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "homeguard/conflict.hpp"
#include "homeguard/model.hpp"
#include "homeguard/priority.hpp"

namespace homeguard {

/// Clause edits to apply right away, keyed by the clause they replace. A list
/// may hold the original (same id, e.g. with a new exemption) and new clauses
/// (id 0, assigned on install). An empty list drops the clause.
using ClauseEdits = std::map<ClauseId, std::vector<PolicyClause>>;

/// Edits deferred until a session closes.
struct DeferredPlan {
  std::vector<ClauseId> retire;     // removed, or exempted for `scope` if general
  std::optional<UserId> scope;      // subject the retirement applies to
  std::vector<PolicyClause> install;
  friend bool operator==(const DeferredPlan&, const DeferredPlan&) = default;
};

struct NegotiationOutcome {
  enum class Kind { Resolved, Proposal, Escalated };

  Kind kind = Kind::Resolved;
  ConflictClass cls = ConflictClass::None;
  std::optional<PolicyClause> clause;  // enforced clause, or the proposed one
  std::vector<UserId> parties;         // proposal parties
  std::optional<SessionId> session;    // filled by the engine
  UserId escalated_to;
  std::string reason;
  ClauseEdits edits;
  DeferredPlan on_accept;
  std::vector<Notice> notices;
};

std::string_view to_string(NegotiationOutcome::Kind k);

enum class Verdict { Pending, Accept, Reject };
std::string_view to_string(Verdict v);
Verdict verdict_from_string(std::string_view s);

enum class SessionState { Open, Agreed, Rejected, Escalated };
std::string_view to_string(SessionState s);
SessionState session_state_from_string(std::string_view s);

struct NegotiationSession {
  SessionId id{};
  ConflictReport report;
  ConditionSet proposal;
  PolicyClause proposed;
  std::optional<PolicyClause> held;  // clause kept out of force while the session is open
  std::map<UserId, Verdict> responses;
  SessionState state = SessionState::Open;
  Instant created_at = 0;
  UserId escalate_to;  // who decides if the parties do not agree
  DeferredPlan on_accept;

  std::vector<UserId> parties() const;
  bool terminal() const { return state != SessionState::Open; }

  friend bool operator==(const NegotiationSession&, const NegotiationSession&) = default;
};

/// Merge for soft conflicts. `base` supplies subject, device and action; the
/// other clause's conditions are intersected (same action) or intersected as
/// complements (different action). Throws Error("empty_merge") on an empty region.
PolicyClause merge_soft(const PolicyClause& base, const PolicyClause& other,
                        const DomainCatalog& domains = DomainCatalog::defaults());

/// Floor midpoints of the region hulls per common numeric attribute, endpoint
/// averages for single time windows. Throws Error("no_common_attribute").
ConditionSet average_conditions(const ConditionSet& ci, const ConditionSet& cj,
                                const DomainCatalog& domains = DomainCatalog::defaults());

/// Clause-level vote on a binary device: demand votes on, restrict votes off.
NegotiationOutcome majority_vote(const std::vector<PolicyClause>& clauses, bool device_is_binary,
                                 const PriorityTable& table);

/// Resolution of one classified pair. The clause with the larger id is the
/// newer one; it is the one held back when a decision needs people.
NegotiationOutcome negotiate(const ConflictReport& report, const PolicyClause& ci, const PolicyClause& cj,
                             const PriorityTable& table, bool device_is_binary,
                             const DomainCatalog& domains = DomainCatalog::defaults());

/// Error codes: SessionClosed, NotParty, AlreadyResponded.
NegotiationSession respond(const NegotiationSession& session, const UserId& party, Verdict verdict);

/// Open sessions older than `timeout` seconds escalate.
NegotiationSession expire_if_stale(const NegotiationSession& session, Instant now, Instant timeout);

/// The subject two interfering clauses share: nullopt when both are general.
std::optional<UserId> shared_subject(const PolicyClause& a, const PolicyClause& b);

/// Presence conditions that gate whether a clause applies at all, as opposed
/// to constraining its subject.
std::vector<Condition> presence_gates(const PolicyClause& c);

/// What is left of `loser` once `cut` conditions hold: one clause per disjoint
/// piece of loser AND NOT(conjunction of cut). Empty when nothing is left.
std::vector<PolicyClause> residual(const PolicyClause& loser, const std::vector<Condition>& cut,
                                   const DomainCatalog& domains);

}  // namespace homeguard
