#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "homeguard/types.hpp"

namespace homeguard {

/// Request to add a user: [commander, new user, class, device permission, validity].
struct UserRecord {
  UserId commander;
  UserId new_user;
  int priority = 0;
  bool device_perm = false;
  std::optional<Instant> validity;  // seconds from the time of the add
  std::string role;
};

/// A second, competing assignment for an existing user awaiting a decision.
struct PendingAssignment {
  UserId commander;
  int priority = 0;
  bool device_perm = false;
  std::optional<Instant> expiry;

  friend bool operator==(const PendingAssignment&, const PendingAssignment&) = default;
};

struct UserEntry {
  int priority = 0;
  bool device_perm = false;
  std::optional<Instant> expiry;
  std::optional<UserId> commander;  // absent for the bootstrap owner
  std::string role;
  std::optional<PendingAssignment> pending;

  friend bool operator==(const UserEntry&, const UserEntry&) = default;
};

class PriorityTable {
 public:
  bool empty() const { return entries_.empty(); }
  bool contains(const UserId& u) const { return entries_.count(u) != 0; }
  const UserEntry* find(const UserId& u) const;
  /// Throws Error("unknown_user") when absent.
  const UserEntry& at(const UserId& u) const;
  int class_of(const UserId& u) const { return at(u).priority; }

  const std::map<UserId, UserEntry>& entries() const { return entries_; }
  std::vector<UserId> users() const;
  /// Class-0 users in id order.
  std::vector<UserId> admins() const;
  /// Lowest-class user, smallest id among ties. Escalation target.
  UserId top_authority() const;

  void put(const UserId& u, UserEntry e) { entries_[u] = std::move(e); }
  bool erase(const UserId& u) { return entries_.erase(u) != 0; }

  friend bool operator==(const PriorityTable&, const PriorityTable&) = default;

 private:
  std::map<UserId, UserEntry> entries_;
};

PriorityTable bootstrap(const PriorityTable& table, const UserId& owner);
inline PriorityTable bootstrap(const UserId& owner) { return bootstrap(PriorityTable{}, owner); }

enum class AddOutcome {
  Inserted,
  Reassigned,    // existing entry replaced by an outranking commander's assignment
  KeptExisting,  // existing assignment outranks the new one; nothing changed
  Pending        // equal-rank commanders disagree; blocked until resolved
};

std::string_view to_string(AddOutcome o);

struct AddUserResult {
  PriorityTable table;
  AddOutcome outcome = AddOutcome::Inserted;
  /// Commanders to tell about the decision (the losing or disagreeing ones).
  std::vector<UserId> notify;
};

/// Error codes thrown as homeguard::Error:
///   AssignAboveOwnAuthority, DevicePermEscalation, CommanderExpired,
///   UnknownCommander, CommanderPending, InvalidRecord
AddUserResult add_user(const UserRecord& rec, const PriorityTable& table, Instant now);

/// Settles a pending dual assignment. The resolver must be one of the two
/// disagreeing commanders or outrank both, and may not set a class above its own.
PriorityTable resolve_pending(const PriorityTable& table, const UserId& user, const UserId& resolver,
                              int priority, Instant now);

std::pair<PriorityTable, std::vector<UserId>> remove_expired(const PriorityTable& table, Instant now);

bool outranks(const UserId& a, const UserId& b, const PriorityTable& table);
bool same_class(const UserId& a, const UserId& b, const PriorityTable& table);

/// Authority of a set of owners (a merged clause): its best member's class.
int class_of_set(const std::vector<UserId>& owners, const PriorityTable& table);

/// Display label for a class: owner, adult, guest, child.
std::string role_for_class(int priority);

}  // namespace homeguard
