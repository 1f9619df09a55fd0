#pragma once

// Magnitude-bounded fine-tuning. The inner problem (maximize G_i . Delta_i
// subject to ||Delta_i|| <= gamma) has the closed form gamma * G_i / ||G_i||,
// so every validation query's score difference against a competitor is
// affine in gamma. Each query is therefore answered correctly on a single
// interval of gamma, and the validation-optimal gamma is a point stabbing
// the most intervals.

#include <cstddef>
#include <optional>
#include <vector>

#include "nudge/core.hpp"
#include "nudge/interval.hpp"
#include "nudge/report.hpp"

namespace nudge {

struct QueryInterval {
  std::size_t query = 0;
  Interval interval;
};

struct SweepResult {
  double gamma_star = 0.0;
  std::size_t correct_count = 0;        // max(stabbing_count, count_at_zero)
  std::size_t stabbing_count = 0;       // best over gamma > 0
  std::size_t count_at_zero = 0;
  std::optional<Interval> best_region;  // region achieving stabbing_count
};

/// Denominators below this magnitude are treated as exactly zero.
inline constexpr double kZeroDenominator = 1e-12;

/// Delta_i = gamma * G_i / ||G_i||, zero rows stay zero.
EmbeddingMatrix maxs_m_delta(const AggregateMatrix& g, double gamma);

struct MagnitudeIntervals {
  std::vector<QueryInterval> intervals;  // only queries with a nonempty set
  std::size_t count_at_zero = 0;         // queries correct with Delta = 0
};

/// Per validation query, the set of gamma > 0 for which it is answered
/// correctly after applying maxs_m_delta(G, gamma). Single-label only.
MagnitudeIntervals feasibility_intervals(const EmbeddingMatrix& val_queries,
                                         const LabelSet& val_labels,
                                         const EmbeddingMatrix& data,
                                         const AggregateMatrix& g);

/// Picks gamma maximizing the number of open intervals containing it, or 0
/// when count_at_zero is at least as good. Ties between regions go to the
/// one with the smaller lower endpoint. Inside the winning region gamma is
/// the midpoint, or lo + median finite width when the region is unbounded.
SweepResult max_overlap(const std::vector<Interval>& intervals, std::size_t count_at_zero);

struct NudgeMOptions {
  bool weighted_labels = false;
};

/// gamma selection from precomputed aggregates; used by nudge_m and by
/// callers that already hold G.
SweepResult select_gamma_m(const EmbeddingMatrix& data, const AggregateMatrix& g,
                           const EmbeddingMatrix& val_queries, const LabelSet& val_labels);

FineTuneResult nudge_m(const EmbeddingMatrix& data, const EmbeddingMatrix& train_queries,
                       const LabelSet& train_labels, const EmbeddingMatrix& val_queries,
                       const LabelSet& val_labels, const NudgeMOptions& options = {});

}  // namespace nudge
