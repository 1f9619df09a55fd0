#include "nudge/interval.hpp"

#include <algorithm>

namespace nudge {

IntervalUnion::IntervalUnion(Interval single) {
  if (single.lo < single.hi) parts_.push_back(single);
}

IntervalUnion IntervalUnion::from(std::vector<Interval> parts) {
  std::erase_if(parts, [](const Interval& iv) { return !(iv.lo < iv.hi); });
  std::sort(parts.begin(), parts.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  IntervalUnion out;
  for (const auto& iv : parts) {
    // Strict overlap only; (a, b) and (b, c) remain two parts.
    if (!out.parts_.empty() && iv.lo < out.parts_.back().hi) {
      out.parts_.back().hi = std::max(out.parts_.back().hi, iv.hi);
    } else {
      out.parts_.push_back(iv);
    }
  }
  return out;
}

bool IntervalUnion::contains(double x) const {
  return std::any_of(parts_.begin(), parts_.end(),
                     [x](const Interval& iv) { return iv.contains(x); });
}

IntervalUnion IntervalUnion::intersect(const IntervalUnion& other) const {
  IntervalUnion out;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < parts_.size() && j < other.parts_.size()) {
    const Interval& a = parts_[i];
    const Interval& b = other.parts_[j];
    const double lo = std::max(a.lo, b.lo);
    const double hi = std::min(a.hi, b.hi);
    if (lo < hi) out.parts_.push_back({lo, hi});
    if (a.hi < b.hi) {
      ++i;
    } else {
      ++j;
    }
  }
  return out;
}

IntervalUnion IntervalUnion::unite(const IntervalUnion& other) const {
  std::vector<Interval> all = parts_;
  all.insert(all.end(), other.parts_.begin(), other.parts_.end());
  return from(std::move(all));
}

IntervalUnion IntervalUnion::clip(double lo, double hi) const {
  return intersect(IntervalUnion(Interval{lo, hi}));
}

void IntervalUnion::join_at(double x) {
  for (std::size_t k = 0; k + 1 < parts_.size(); ++k) {
    if (parts_[k].hi == x && parts_[k + 1].lo == x) {
      parts_[k].hi = parts_[k + 1].hi;
      parts_.erase(parts_.begin() + static_cast<std::ptrdiff_t>(k) + 1);
      return;
    }
  }
}

}  // namespace nudge
