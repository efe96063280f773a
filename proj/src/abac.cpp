#include "homeguard/abac.hpp"

#include <algorithm>

namespace homeguard {

std::string_view to_string(Effect e) { return e == Effect::Permit ? "permit" : "deny"; }

bool AbacRule::applies_to(const UserId& u) const {
  if (subject) return *subject == u;
  if (std::find(exempt.begin(), exempt.end(), u) != exempt.end()) return false;
  return !(effect == Effect::Deny && std::find(owners.begin(), owners.end(), u) != owners.end());
}

AbacRule generate_rule(const PolicyClause& c) {
  return AbacRule{c.id,     c.action == Action::Demand ? Effect::Permit : Effect::Deny,
                  c.subject, c.exempt,
                  c.device, c.conditions,
                  c.owners, c.sources,
                  c.expiry};
}

const AbacRule* RuleTable::find(ClauseId id) const {
  auto it = std::lower_bound(rules_.begin(), rules_.end(), id, [](const AbacRule& r, ClauseId x) { return r.id < x; });
  return it != rules_.end() && it->id == id ? &*it : nullptr;
}

std::vector<const AbacRule*> RuleTable::lookup(const UserId& subject, const DeviceId& resource) const {
  std::vector<const AbacRule*> out;
  auto it = by_resource_.find(resource);
  if (it == by_resource_.end()) return out;
  for (auto k : it->second)
    if (rules_[k].applies_to(subject)) out.push_back(&rules_[k]);
  return out;
}

RuleTable rebuild_table(const std::vector<PolicyClause>& resolved) {
  RuleTable t;
  for (const auto& c : resolved) t.rules_.push_back(generate_rule(c));
  std::sort(t.rules_.begin(), t.rules_.end(), [](const AbacRule& a, const AbacRule& b) { return a.id < b.id; });
  for (std::size_t k = 0; k < t.rules_.size(); ++k)
    if (t.rules_[k].effect == Effect::Deny) t.by_resource_[t.rules_[k].resource].push_back(k);
  for (std::size_t k = 0; k < t.rules_.size(); ++k)
    if (t.rules_[k].effect == Effect::Permit) t.by_resource_[t.rules_[k].resource].push_back(k);
  return t;
}

}  // namespace homeguard
