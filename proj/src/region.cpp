#include "homeguard/region.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace homeguard {

IntervalSet::IntervalSet(std::initializer_list<Interval> parts) : parts_(parts) { canonicalize(); }

IntervalSet::IntervalSet(std::vector<Interval> parts) : parts_(std::move(parts)) { canonicalize(); }

IntervalSet IntervalSet::single(std::int64_t lo, std::int64_t hi) { return IntervalSet{{lo, hi}}; }

void IntervalSet::canonicalize() {
  std::erase_if(parts_, [](const Interval& iv) { return iv.lo > iv.hi; });
  std::sort(parts_.begin(), parts_.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo || (a.lo == b.lo && a.hi < b.hi); });
  std::vector<Interval> merged;
  merged.reserve(parts_.size());
  for (const auto& iv : parts_) {
    // adjacency over the integers: [1,3] and [4,6] are one run
    if (!merged.empty() && iv.lo <= merged.back().hi + 1) {
      merged.back().hi = std::max(merged.back().hi, iv.hi);
    } else {
      merged.push_back(iv);
    }
  }
  parts_ = std::move(merged);
}

bool IntervalSet::contains(std::int64_t v) const {
  auto it = std::upper_bound(parts_.begin(), parts_.end(), v,
                             [](std::int64_t x, const Interval& iv) { return x < iv.lo; });
  if (it == parts_.begin()) return false;
  --it;
  return v <= it->hi;
}

std::uint64_t IntervalSet::cardinality() const {
  std::uint64_t n = 0;
  for (const auto& iv : parts_) n += static_cast<std::uint64_t>(iv.hi - iv.lo) + 1;
  return n;
}

std::int64_t IntervalSet::min() const {
  if (parts_.empty()) throw std::logic_error("min() of empty interval set");
  return parts_.front().lo;
}

std::int64_t IntervalSet::max() const {
  if (parts_.empty()) throw std::logic_error("max() of empty interval set");
  return parts_.back().hi;
}

IntervalSet IntervalSet::intersect(const IntervalSet& other) const {
  std::vector<Interval> out;
  std::size_t i = 0, j = 0;
  while (i < parts_.size() && j < other.parts_.size()) {
    const auto& a = parts_[i];
    const auto& b = other.parts_[j];
    const auto lo = std::max(a.lo, b.lo);
    const auto hi = std::min(a.hi, b.hi);
    if (lo <= hi) out.push_back({lo, hi});
    if (a.hi < b.hi) {
      ++i;
    } else {
      ++j;
    }
  }
  return IntervalSet(std::move(out));
}

IntervalSet IntervalSet::unite(const IntervalSet& other) const {
  std::vector<Interval> all = parts_;
  all.insert(all.end(), other.parts_.begin(), other.parts_.end());
  return IntervalSet(std::move(all));
}

IntervalSet IntervalSet::complement(const IntervalSet& universe) const {
  std::vector<Interval> out;
  for (const auto& u : universe.parts_) {
    auto cursor = u.lo;
    for (const auto& iv : parts_) {
      if (iv.hi < cursor) continue;
      if (iv.lo > u.hi) break;
      if (iv.lo > cursor) out.push_back({cursor, iv.lo - 1});
      cursor = std::max(cursor, iv.hi + 1);
      if (cursor > u.hi) break;
    }
    if (cursor <= u.hi) out.push_back({cursor, u.hi});
  }
  return IntervalSet(std::move(out));
}

std::string IntervalSet::to_string() const {
  std::ostringstream os;
  os << '{';
  for (std::size_t k = 0; k < parts_.size(); ++k) {
    if (k) os << ", ";
    os << '[' << parts_[k].lo << ',' << parts_[k].hi << ']';
  }
  os << '}';
  return os.str();
}

}  // namespace homeguard
