#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace homeguard {

/// Closed integer interval [lo, hi].
struct Interval {
  std::int64_t lo = 0;
  std::int64_t hi = 0;

  friend bool operator==(const Interval&, const Interval&) = default;
};

/// A finite union of closed integer intervals kept in canonical form:
/// sorted, non-empty, non-overlapping and non-adjacent. Canonical form makes
/// structural equality coincide with set equality.
class IntervalSet {
 public:
  IntervalSet() = default;
  IntervalSet(std::initializer_list<Interval> parts);
  explicit IntervalSet(std::vector<Interval> parts);

  static IntervalSet single(std::int64_t lo, std::int64_t hi);

  bool empty() const { return parts_.empty(); }
  bool contains(std::int64_t v) const;
  std::uint64_t cardinality() const;
  std::int64_t min() const;
  std::int64_t max() const;

  const std::vector<Interval>& parts() const { return parts_; }

  IntervalSet intersect(const IntervalSet& other) const;
  IntervalSet unite(const IntervalSet& other) const;
  /// Complement relative to `universe`.
  IntervalSet complement(const IntervalSet& universe) const;
  bool overlaps(const IntervalSet& other) const { return !intersect(other).empty(); }
  bool subset_of(const IntervalSet& other) const { return intersect(other) == *this; }

  std::string to_string() const;

  friend bool operator==(const IntervalSet&, const IntervalSet&) = default;

 private:
  void canonicalize();
  std::vector<Interval> parts_;
};

}  // namespace homeguard
