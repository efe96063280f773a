#pragma once

#include <map>
#include <optional>
#include <vector>

#include "homeguard/model.hpp"

namespace homeguard {

enum class Effect { Permit, Deny };
std::string_view to_string(Effect e);

struct AbacRule {
  ClauseId id{};  // the source clause id
  Effect effect = Effect::Permit;
  std::optional<UserId> subject;  // nullopt: all users
  std::vector<UserId> exempt;
  DeviceId resource;
  ConditionSet constraints;
  std::vector<UserId> owners;
  std::vector<ClauseId> sources;
  std::optional<Instant> expiry;

  bool applies_to(const UserId& u) const;

  friend bool operator==(const AbacRule&, const AbacRule&) = default;
};

AbacRule generate_rule(const PolicyClause& clause);

class RuleTable {
 public:
  RuleTable() = default;

  bool empty() const { return rules_.empty(); }
  std::size_t size() const { return rules_.size(); }
  /// All rules in id order.
  const std::vector<AbacRule>& rules() const { return rules_; }
  const AbacRule* find(ClauseId id) const;

  /// Deny rules first, then permit rules, each in id order.
  std::vector<const AbacRule*> lookup(const UserId& subject, const DeviceId& resource) const;

  friend RuleTable rebuild_table(const std::vector<PolicyClause>& resolved);
  friend bool operator==(const RuleTable& a, const RuleTable& b) { return a.rules_ == b.rules_; }

 private:
  std::vector<AbacRule> rules_;
  std::map<DeviceId, std::vector<std::size_t>> by_resource_;  // deny-first order
};

RuleTable rebuild_table(const std::vector<PolicyClause>& resolved);

}  // namespace homeguard
