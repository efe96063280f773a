#include "homeguard/priority.hpp"

#include <algorithm>

namespace homeguard {

const UserEntry* PriorityTable::find(const UserId& u) const {
  auto it = entries_.find(u);
  return it == entries_.end() ? nullptr : &it->second;
}

const UserEntry& PriorityTable::at(const UserId& u) const {
  if (const auto* e = find(u)) return *e;
  throw Error("unknown_user", "unknown user '" + u + "'");
}

std::vector<UserId> PriorityTable::users() const {
  std::vector<UserId> out;
  out.reserve(entries_.size());
  for (const auto& [id, _] : entries_) out.push_back(id);
  return out;
}

std::vector<UserId> PriorityTable::admins() const {
  std::vector<UserId> out;
  for (const auto& [id, e] : entries_)
    if (e.priority == 0) out.push_back(id);
  return out;
}

UserId PriorityTable::top_authority() const {
  if (entries_.empty()) throw Error("empty_table", "priority table is empty");
  // std::map iterates in id order, so the first strict minimum is the smallest id
  auto best = entries_.begin();
  for (auto it = entries_.begin(); it != entries_.end(); ++it)
    if (it->second.priority < best->second.priority) best = it;
  return best->first;
}

PriorityTable bootstrap(const PriorityTable& table, const UserId& owner) {
  if (!table.empty()) throw Error("AlreadyBootstrapped", "priority table already has an owner");
  if (owner.empty()) throw Error("InvalidRecord", "owner id is empty");
  PriorityTable t;
  t.put(owner, UserEntry{0, true, std::nullopt, std::nullopt, role_for_class(0), std::nullopt});
  return t;
}

std::string_view to_string(AddOutcome o) {
  switch (o) {
    case AddOutcome::Inserted: return "inserted";
    case AddOutcome::Reassigned: return "reassigned";
    case AddOutcome::KeptExisting: return "kept_existing";
    case AddOutcome::Pending: return "pending";
  }
  return "?";
}

AddUserResult add_user(const UserRecord& rec, const PriorityTable& table, Instant now) {
  if (rec.new_user.empty()) throw Error("InvalidRecord", "new user id is empty");
  if (rec.priority < 0) throw Error("InvalidRecord", "priority must be non-negative");
  if (rec.commander == rec.new_user) throw Error("InvalidRecord", "a user cannot add itself");
  if (rec.validity && *rec.validity <= 0) throw Error("InvalidRecord", "validity must be positive");

  const auto* cmd = table.find(rec.commander);
  if (!cmd) throw Error("UnknownCommander", "unknown commander '" + rec.commander + "'");
  if (cmd->expiry && *cmd->expiry <= now)
    throw Error("CommanderExpired", "commander '" + rec.commander + "' has expired");
  if (cmd->pending)
    throw Error("CommanderPending", "commander '" + rec.commander + "' awaits priority resolution");
  if (rec.priority < cmd->priority)
    throw Error("AssignAboveOwnAuthority", "class " + std::to_string(cmd->priority) + " commander '" +
                                                rec.commander + "' cannot assign class " +
                                                std::to_string(rec.priority));
  if (rec.device_perm && !cmd->device_perm)
    throw Error("DevicePermEscalation",
                "commander '" + rec.commander + "' lacks the device permission it tries to grant");

  std::optional<Instant> expiry;
  if (rec.validity) expiry = now + *rec.validity;
  UserEntry fresh{rec.priority, rec.device_perm, expiry, rec.commander,
                  rec.role.empty() ? role_for_class(rec.priority) : rec.role, std::nullopt};

  AddUserResult res{table, AddOutcome::Inserted, {}};
  const auto* existing = table.find(rec.new_user);
  if (!existing) {
    res.table.put(rec.new_user, std::move(fresh));
    return res;
  }
  if (!existing->commander) {
    // the bootstrap owner is never reassigned
    res.outcome = AddOutcome::KeptExisting;
    res.notify = {rec.commander};
    return res;
  }
  const UserId& prev = *existing->commander;
  if (prev == rec.commander || !table.contains(prev)) {
    fresh.pending = existing->pending;
    res.table.put(rec.new_user, std::move(fresh));
    res.outcome = AddOutcome::Reassigned;
    return res;
  }
  if (existing->priority == rec.priority && !existing->pending) {
    res.outcome = AddOutcome::KeptExisting;
    return res;
  }
  const int c_prev = table.class_of(prev);
  if (cmd->priority < c_prev) {
    res.table.put(rec.new_user, std::move(fresh));
    res.outcome = AddOutcome::Reassigned;
    res.notify = {prev};
    return res;
  }
  if (cmd->priority > c_prev) {
    res.outcome = AddOutcome::KeptExisting;
    res.notify = {rec.commander};
    return res;
  }
  UserEntry blocked = *existing;
  blocked.pending = PendingAssignment{rec.commander, rec.priority, rec.device_perm, expiry};
  res.table.put(rec.new_user, std::move(blocked));
  res.outcome = AddOutcome::Pending;
  res.notify = {std::min(prev, rec.commander), std::max(prev, rec.commander)};
  return res;
}

PriorityTable resolve_pending(const PriorityTable& table, const UserId& user, const UserId& resolver,
                              int priority, Instant now) {
  const auto& entry = table.at(user);
  if (!entry.pending) throw Error("NotPending", "user '" + user + "' has no pending assignment");
  const auto* r = table.find(resolver);
  if (!r) throw Error("UnknownCommander", "unknown resolver '" + resolver + "'");
  if (r->expiry && *r->expiry <= now) throw Error("CommanderExpired", "resolver has expired");

  const UserId first = entry.commander.value_or("");
  const UserId& second = entry.pending->commander;
  const bool party = resolver == first || resolver == second;
  const int c_first = table.contains(first) ? table.class_of(first) : 0;
  const int c_second = table.contains(second) ? table.class_of(second) : 0;
  if (!party && !(r->priority < c_first && r->priority < c_second))
    throw Error("NotAuthorized", "'" + resolver + "' may not resolve the assignment of '" + user + "'");
  if (priority < r->priority)
    throw Error("AssignAboveOwnAuthority", "resolver cannot assign a class above its own");

  UserEntry out = entry;
  if (priority == entry.pending->priority && priority != entry.priority) {
    out.commander = entry.pending->commander;
    out.device_perm = entry.pending->device_perm;
    out.expiry = entry.pending->expiry;
  }
  out.priority = priority;
  out.pending.reset();
  PriorityTable t = table;
  t.put(user, std::move(out));
  return t;
}

std::pair<PriorityTable, std::vector<UserId>> remove_expired(const PriorityTable& table, Instant now) {
  PriorityTable t = table;
  std::vector<UserId> removed;
  for (const auto& [id, e] : table.entries())
    if (e.expiry && *e.expiry <= now) removed.push_back(id);
  for (const auto& id : removed) t.erase(id);
  return {std::move(t), std::move(removed)};
}

bool outranks(const UserId& a, const UserId& b, const PriorityTable& table) {
  return table.class_of(a) < table.class_of(b);
}

bool same_class(const UserId& a, const UserId& b, const PriorityTable& table) {
  return table.class_of(a) == table.class_of(b);
}

int class_of_set(const std::vector<UserId>& owners, const PriorityTable& table) {
  if (owners.empty()) throw Error("unknown_user", "empty owner set");
  int best = table.class_of(owners.front());
  for (const auto& o : owners) best = std::min(best, table.class_of(o));
  return best;
}

std::string role_for_class(int priority) {
  switch (priority) {
    case 0: return "owner";
    case 1: return "adult";
    case 2: return "guest";
    case 3: return "child";
    default: return "temporary";
  }
}

}  // namespace homeguard
