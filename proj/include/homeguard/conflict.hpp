#pragma once

#include <optional>
#include <string>
#include <vector>

#include "homeguard/model.hpp"
#include "homeguard/priority.hpp"

namespace homeguard {

enum class ConflictClass { None, HPC, SPC, HCC, SCC, RC };

std::string_view to_string(ConflictClass c);
ConflictClass conflict_class_from_string(std::string_view s);
inline bool is_hard(ConflictClass c) { return c == ConflictClass::HPC || c == ConflictClass::HCC; }
inline bool is_soft(ConflictClass c) { return c == ConflictClass::SPC || c == ConflictClass::SCC; }

struct AttributeOverlap {
  std::string attribute;
  IntervalSet region_i;
  IntervalSet region_j;
  bool overlap = false;

  friend bool operator==(const AttributeOverlap&, const AttributeOverlap&) = default;
};

struct ConflictReport {
  ClauseId i{};
  ClauseId j{};
  ConflictClass cls = ConflictClass::None;
  std::vector<AttributeOverlap> detail;  // one entry per common condition key

  friend bool operator==(const ConflictReport&, const ConflictReport&) = default;
};

/// Same device and intersecting subject sets.
bool interfere(const PolicyClause& a, const PolicyClause& b);

/// Throws Error("attribute_mismatch") when the regions describe different attributes.
bool overlap_theta(const AllowedRegion& x, const AllowedRegion& y);

/// Keys constrained by both clauses, sorted.
std::vector<std::string> common_keys(const PolicyClause& a, const PolicyClause& b);

ConflictClass classify(const PolicyClause& a, const PolicyClause& b, const PriorityTable& table,
                       const DomainCatalog& domains = DomainCatalog::defaults());

/// Classified report, or nullopt when the pair does not conflict. RC reports
/// put the restrict clause first; others keep the argument order.
std::optional<ConflictReport> examine(const PolicyClause& a, const PolicyClause& b, const PriorityTable& table,
                                      const DomainCatalog& domains = DomainCatalog::defaults());

/// All conflicting pairs, ordered by (smaller id, larger id).
std::vector<ConflictReport> scan(const std::vector<PolicyClause>& policies, const PriorityTable& table,
                                 const DomainCatalog& domains = DomainCatalog::defaults());

}  // namespace homeguard
