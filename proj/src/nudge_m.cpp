#include "nudge/nudge_m.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "checks.hpp"
#include "nudge/error.hpp"
#include "nudge/parallel.hpp"

namespace nudge {

EmbeddingMatrix maxs_m_delta(const AggregateMatrix& g, double gamma) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw InvalidArgument("gamma must be a finite nonnegative number, got " +
                          std::to_string(gamma));
  }
  EmbeddingMatrix delta(g.rows(), g.dim());
  for (std::size_t i = 0; i < g.rows(); ++i) {
    const double len = g.row_norm(i);
    if (len == 0.0) continue;
    auto src = g.row(i);
    auto dst = delta.row(i);
    for (std::size_t k = 0; k < g.dim(); ++k) dst[k] = gamma * (src[k] / len);
  }
  return delta;
}

MagnitudeIntervals feasibility_intervals(const EmbeddingMatrix& val_queries,
                                         const LabelSet& val_labels,
                                         const EmbeddingMatrix& data,
                                         const AggregateMatrix& g) {
  detail::require_same_dim(val_queries, "validation queries", data, "data");
  detail::require_aggregate_shape(g, data);
  val_labels.validate(val_queries.rows(), data.rows());
  detail::require_single_label(val_labels, val_queries.rows(), "magnitude interval search");

  const auto targets = val_labels.single_targets(val_queries.rows());
  const EmbeddingMatrix directions = g.unit_directions();
  const std::size_t n = data.rows();

  struct PerQuery {
    bool correct_at_zero = false;
    bool nonempty = false;
    Interval interval;
  };
  std::vector<PerQuery> results(val_queries.rows());

  parallel_for(val_queries.rows(), [&](std::size_t i) {
    const auto q = val_queries.row(i);
    const std::size_t y = targets[i];
    const double s_y = dot(q, data.row(y));
    const double g_y = dot(q, directions.row(y));

    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool feasible = true;
    bool zero_ok = true;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == y) continue;
      const double s_j = dot(q, data.row(j));
      const double numerator = s_j - s_y;
      if (!(numerator < 0.0)) zero_ok = false;
      if (!feasible) continue;
      const double denominator = g_y - dot(q, directions.row(j));
      if (std::abs(denominator) < kZeroDenominator) {
        // Equality counts as a tie, and ties are incorrect.
        if (!(numerator < 0.0)) feasible = false;
        continue;
      }
      const double r = numerator / denominator;
      if (denominator > 0.0) {
        lo = std::max(lo, r);
      } else {
        hi = std::min(hi, r);
      }
    }
    lo = std::max(lo, 0.0);
    results[i].correct_at_zero = zero_ok;
    if (feasible && lo < hi) {
      results[i].nonempty = true;
      results[i].interval = {lo, hi};
    }
  });

  MagnitudeIntervals out;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].correct_at_zero) ++out.count_at_zero;
    if (results[i].nonempty) out.intervals.push_back({i, results[i].interval});
  }
  return out;
}

SweepResult max_overlap(const std::vector<Interval>& intervals, std::size_t count_at_zero) {
  SweepResult result;
  result.count_at_zero = count_at_zero;
  result.correct_count = count_at_zero;

  struct Event {
    double x;
    int delta;  // -1 closes, +1 opens
  };
  std::vector<Event> events;
  events.reserve(intervals.size() * 2);
  std::vector<double> finite_widths;
  for (const auto& iv : intervals) {
    if (!(iv.lo < iv.hi)) continue;
    events.push_back({iv.lo, +1});
    events.push_back({iv.hi, -1});
    if (iv.bounded()) finite_widths.push_back(iv.hi - iv.lo);
  }
  // Open intervals: at a shared coordinate, closings are applied before
  // openings so (a, b) and (b, c) never overlap.
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    return a.x != b.x ? a.x < b.x : a.delta < b.delta;
  });

  std::size_t active = 0;
  std::size_t best = 0;
  std::size_t k = 0;
  while (k < events.size()) {
    const double x = events[k].x;
    while (k < events.size() && events[k].x == x) {
      active = events[k].delta > 0 ? active + 1 : active - 1;
      ++k;
    }
    if (active == 0 || k == events.size()) continue;
    if (active > best) {
      best = active;
      result.best_region = Interval{x, events[k].x};
    }
  }
  result.stabbing_count = best;

  if (best > count_at_zero && result.best_region) {
    const Interval& region = *result.best_region;
    if (region.bounded()) {
      result.gamma_star = region.lo + 0.5 * (region.hi - region.lo);
    } else {
      double width = 1.0;
      if (!finite_widths.empty()) {
        std::sort(finite_widths.begin(), finite_widths.end());
        const std::size_t m = finite_widths.size();
        width = m % 2 == 1 ? finite_widths[m / 2]
                           : 0.5 * (finite_widths[m / 2 - 1] + finite_widths[m / 2]);
      }
      result.gamma_star = region.lo + width;
    }
    result.correct_count = best;
  }
  return result;
}

SweepResult select_gamma_m(const EmbeddingMatrix& data, const AggregateMatrix& g,
                           const EmbeddingMatrix& val_queries, const LabelSet& val_labels) {
  const auto found = feasibility_intervals(val_queries, val_labels, data, g);
  std::vector<Interval> intervals;
  intervals.reserve(found.intervals.size());
  for (const auto& qi : found.intervals) intervals.push_back(qi.interval);
  return max_overlap(intervals, found.count_at_zero);
}

FineTuneResult nudge_m(const EmbeddingMatrix& data, const EmbeddingMatrix& train_queries,
                       const LabelSet& train_labels, const EmbeddingMatrix& val_queries,
                       const LabelSet& val_labels, const NudgeMOptions& options) {
  detail::require_same_dim(train_queries, "training queries", data, "data");
  detail::require_same_dim(val_queries, "validation queries", data, "data");

  FineTuneResult result;
  FineTuneReport& report = result.report;
  report.method = "m";
  report.n = data.rows();
  report.d = data.dim();
  report.n_train = train_queries.rows();
  report.n_val = val_queries.rows();
  report.weighted_labels = options.weighted_labels;
  PhaseTimer timer(report);

  const AggregateMatrix g =
      compute_aggregates(train_queries, train_labels, data.rows(), options.weighted_labels);
  timer.lap("aggregate");

  const SweepResult sweep = select_gamma_m(data, g, val_queries, val_labels);
  timer.lap("select_gamma");

  report.gamma_star = sweep.gamma_star;
  report.predicted_correct = sweep.correct_count;
  report.val_correct_before = sweep.count_at_zero;
  result.data = add_rows(data, maxs_m_delta(g, sweep.gamma_star));
  timer.lap("apply");

  report.val_correct_after = correctness(val_queries, val_labels, result.data).count;
  if (report.val_correct_after < report.val_correct_before) {
    // Only reachable through rounding at a region edge; gamma = 0 is always
    // a valid answer.
    report.fell_back_to_zero = true;
    report.gamma_star = 0.0;
    report.val_correct_after = report.val_correct_before;
    result.data = data;
  }
  timer.lap("validate");
  return result;
}

}  // namespace nudge
