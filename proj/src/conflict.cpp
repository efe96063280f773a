#include "homeguard/conflict.hpp"

#include <algorithm>

namespace homeguard {

std::string_view to_string(ConflictClass c) {
  switch (c) {
    case ConflictClass::None: return "None";
    case ConflictClass::HPC: return "HPC";
    case ConflictClass::SPC: return "SPC";
    case ConflictClass::HCC: return "HCC";
    case ConflictClass::SCC: return "SCC";
    case ConflictClass::RC: return "RC";
  }
  return "?";
}

ConflictClass conflict_class_from_string(std::string_view s) {
  for (auto c : {ConflictClass::None, ConflictClass::HPC, ConflictClass::SPC, ConflictClass::HCC, ConflictClass::SCC,
                 ConflictClass::RC})
    if (to_string(c) == s) return c;
  throw Error("bad_conflict_class", "unknown conflict class '" + std::string(s) + "'");
}

bool interfere(const PolicyClause& a, const PolicyClause& b) {
  if (a.device != b.device) return false;
  if (a.subject && b.subject) return *a.subject == *b.subject;
  if (a.subject) return b.applies_to(*a.subject);
  if (b.subject) return a.applies_to(*b.subject);
  // two general clauses share every user neither carves out; the user set is open
  return true;
}

bool overlap_theta(const AllowedRegion& x, const AllowedRegion& y) {
  if (x.attribute != y.attribute)
    throw Error("attribute_mismatch", "cannot compare '" + x.attribute + "' with '" + y.attribute + "'");
  return x.region.overlaps(y.region);
}

std::vector<std::string> common_keys(const PolicyClause& a, const PolicyClause& b) {
  std::vector<std::string> out;
  for (const auto& c : a.conditions)
    if (b.conditions.find(c.key())) out.push_back(c.key());
  return out;  // ConditionSet is sorted by key
}

std::optional<ConflictReport> examine(const PolicyClause& a, const PolicyClause& b, const PriorityTable& table,
                                      const DomainCatalog& domains) {
  // one user's clauses never dispute each other
  if (a.owners == b.owners) return std::nullopt;
  if (!interfere(a, b)) return std::nullopt;

  const int ca = class_of_set(a.owners, table);
  const int cb = class_of_set(b.owners, table);

  ConflictReport r{a.id, b.id, ConflictClass::None, {}};
  bool all_overlap = true, some_disjoint = false, some_differ = false;
  for (const auto& key : common_keys(a, b)) {
    auto ra = allowed_region(a, key, domains);
    auto rb = allowed_region(b, key, domains);
    const bool ov = overlap_theta(ra, rb);
    all_overlap = all_overlap && ov;
    some_disjoint = some_disjoint || !ov;
    some_differ = some_differ || ra.region != rb.region;
    r.detail.push_back({key, std::move(ra.region), std::move(rb.region), ov});
  }

  const bool same_action = a.action == b.action;
  if (!same_action) {
    const bool a_restricts = a.action == Action::Restrict;
    const int restrict_class = a_restricts ? ca : cb;
    const int other_class = a_restricts ? cb : ca;
    if (restrict_class < other_class) {
      r.cls = ConflictClass::RC;
      if (!a_restricts) {
        std::swap(r.i, r.j);
        for (auto& d : r.detail) std::swap(d.region_i, d.region_j);
      }
      return r;
    }
  }

  const bool hard = (!same_action && all_overlap) || (same_action && some_disjoint);
  const bool soft = (same_action && all_overlap) || (!same_action && some_differ);
  if (hard) {
    r.cls = ca == cb ? ConflictClass::HCC : ConflictClass::HPC;
  } else if (soft) {
    r.cls = ca == cb ? ConflictClass::SCC : ConflictClass::SPC;
  } else {
    return std::nullopt;
  }
  return r;
}

ConflictClass classify(const PolicyClause& a, const PolicyClause& b, const PriorityTable& table,
                       const DomainCatalog& domains) {
  auto r = examine(a, b, table, domains);
  return r ? r->cls : ConflictClass::None;
}

std::vector<ConflictReport> scan(const std::vector<PolicyClause>& policies, const PriorityTable& table,
                                 const DomainCatalog& domains) {
  std::vector<const PolicyClause*> sorted;
  for (const auto& p : policies) sorted.push_back(&p);
  std::sort(sorted.begin(), sorted.end(), [](auto* x, auto* y) { return x->id < y->id; });
  std::vector<ConflictReport> out;
  for (std::size_t x = 0; x < sorted.size(); ++x)
    for (std::size_t y = x + 1; y < sorted.size(); ++y)
      if (auto r = examine(*sorted[x], *sorted[y], table, domains)) out.push_back(std::move(*r));
  return out;
}

}  // namespace homeguard
