#pragma once

#include <limits>
#include <vector>

namespace nudge {

/// Open interval (lo, hi); either end may be infinite. Never empty.
struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool contains(double x) const { return lo < x && x < hi; }
  bool bounded() const { return hi < std::numeric_limits<double>::infinity(); }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Finite union of open intervals, kept sorted and pairwise disjoint.
/// Touching intervals such as (0, 1) and (1, 2) stay separate: the shared
/// endpoint is not a member.
class IntervalUnion {
 public:
  IntervalUnion() = default;
  explicit IntervalUnion(Interval single);
  /// Sorts and merges overlapping inputs; empty or inverted inputs are dropped.
  static IntervalUnion from(std::vector<Interval> parts);

  const std::vector<Interval>& parts() const { return parts_; }
  bool empty() const { return parts_.empty(); }
  bool contains(double x) const;

  IntervalUnion intersect(const IntervalUnion& other) const;
  IntervalUnion unite(const IntervalUnion& other) const;
  /// Clips every part to (lo, hi).
  IntervalUnion clip(double lo, double hi) const;
  /// Adds the single point x, joining (.., x) and (x, ..) when both exist.
  void join_at(double x);

  friend bool operator==(const IntervalUnion&, const IntervalUnion&) = default;

 private:
  std::vector<Interval> parts_;
};

}  // namespace nudge
