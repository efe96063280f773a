#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "homeguard/abac.hpp"
#include "homeguard/conflict.hpp"
#include "homeguard/enforcement.hpp"
#include "homeguard/model.hpp"
#include "homeguard/negotiation.hpp"
#include "homeguard/policy_lang.hpp"
#include "homeguard/priority.hpp"

namespace homeguard {

struct EngineConfig {
  EnforcementConfig enforcement;
  Instant session_timeout = kSecondsPerDay;
};

struct NotificationRecord {
  std::uint64_t seq = 0;
  Instant at = 0;
  Notice notice;

  friend bool operator==(const NotificationRecord&, const NotificationRecord&) = default;
};

/// Everything the engine knows. Plain data so it can be snapshotted and compared.
struct EngineState {
  Instant now = 0;
  PriorityTable priorities;
  DeviceRoster devices;
  PresenceMap presence;
  std::map<ClauseId, PolicyClause> active;
  std::map<SessionId, NegotiationSession> sessions;
  std::vector<ConflictReport> conflicts;
  std::vector<NotificationRecord> notifications;
  std::map<UserId, UserId> removed;  // removed user -> its former commander
  std::uint64_t next_clause = 1;
  std::uint64_t next_session = 1;

  friend bool operator==(const EngineState&, const EngineState&) = default;
};

/// Side record emitted for the audit log; never replayed.
struct DerivedEvent {
  std::string type;
  std::string summary;
  std::vector<std::uint64_t> ids;
};

struct AddUserReport {
  bool ok = false;
  AddOutcome outcome = AddOutcome::Inserted;
  std::string error;  // error code when !ok
  std::string message;
  std::optional<ThreatTag> threat;
  std::vector<Notice> notices;
};

struct InstallStep {
  ConflictReport report;
  NegotiationOutcome outcome;
};

struct SubmitReport {
  std::vector<PolicyClause> submitted;  // normalized input clauses, as assigned ids
  std::vector<InstallStep> steps;
  std::vector<SessionId> sessions;
};

/// Error thrown for rejected submissions. Carries the parse diagnostics.
class SubmitError : public Error {
 public:
  SubmitError(std::string code, const std::string& what, std::vector<ParseDiagnostic> diags = {})
      : Error(std::move(code), what), diagnostics(std::move(diags)) {}
  std::vector<ParseDiagnostic> diagnostics;
};

struct SessionReport {
  NegotiationSession session;
  std::vector<InstallStep> steps;  // installs triggered by an agreement
};

class Engine {
 public:
  explicit Engine(EngineConfig config = {});

  const EngineState& state() const { return state_; }
  const EngineConfig& config() const { return config_; }
  const RuleTable& rules() const { return rules_; }
  DomainCatalog domains() const;
  /// Replaces the whole state, e.g. from a snapshot, and rebuilds the rule table.
  void restore(EngineState s);

  /// Moves the logical clock forward (never back), then expires users and stale sessions.
  void set_time(Instant t);
  Instant now() const { return state_.now; }

  void bootstrap(const UserId& owner);
  AddUserReport add_user(const UserRecord& rec);
  /// Throws Error("forbidden") unless `actor` is the user's commander or outranks it.
  void remove_user(const UserId& user, const UserId& actor);
  void resolve_user(const UserId& user, const UserId& resolver, int priority);

  /// Throws Error("device_exists"). Roster setup; no permission check.
  void register_device(const DeviceDescriptor& d);
  /// Permission-checked add/remove. A denial is returned, not thrown.
  Decision add_device(const UserId& actor, const DeviceDescriptor& d);
  Decision remove_device(const UserId& actor, const DeviceId& id);

  /// Atomic: either every clause normalizes and installs, or nothing changes.
  SubmitReport submit_text(const std::string& text, const std::string& origin = "<request>");
  SubmitReport submit_arrays(const std::vector<DevicePolicyArray>& arrays);
  SubmitReport submit_clauses(std::vector<ClauseAst> clauses);

  SessionReport respond(SessionId id, const UserId& party, Verdict verdict);

  Decision command(DeviceCommand cmd);
  void set_presence(const UserId& user, Presence p);

  std::vector<UserId> sweep();

  std::vector<PolicyClause> policies() const;
  std::vector<NotificationRecord> notifications_since(std::uint64_t seq) const;

  /// Audit records produced since the last drain.
  std::vector<DerivedEvent> drain_derived();

 private:
  void notify(const Notice& n);
  void notify_all(const std::vector<Notice>& ns);
  void purge_user(const UserId& user);
  void rebuild();
  bool device_is_binary(const DeviceId& d) const;
  std::vector<InstallStep> install(PolicyClause candidate);
  std::vector<InstallStep> apply_plan(const DeferredPlan& plan);
  SubmitReport install_all(std::vector<PolicyClause> clauses);
  void close_session(NegotiationSession& s, std::vector<InstallStep>* steps);

  EngineConfig config_;
  EngineState state_;
  RuleTable rules_;
  std::vector<DerivedEvent> derived_;
};

}  // namespace homeguard
