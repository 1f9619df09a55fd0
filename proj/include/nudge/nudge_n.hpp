#pragma once

// Fine-tuning on the unit sphere. Each record moves along the great circle
// from D_i toward G_i/||G_i||, by an amount controlled by gamma in [0, 4]
// (the bound on ||Delta_i||^2). Every score q . (D_j + Delta_j) is then a
// function of gamma of the form a*sqrt(gamma(4 - gamma)) + b*gamma + c below
// a per-record threshold and constant above it.

#include <cstddef>
#include <vector>

#include "nudge/core.hpp"
#include "nudge/interval.hpp"
#include "nudge/nudge_m.hpp"
#include "nudge/report.hpp"

namespace nudge {

inline constexpr double kMaxSphereGamma = 4.0;

enum class RecordKind {
  Regular,   // Z_i defined
  Zero,      // G_i zero, or zeroed because G_i . D_i < 0
  Parallel,  // G_i a positive multiple of D_i
};

struct SphereGeometry {
  std::vector<RecordKind> kind;
  std::vector<double> cos_theta;  // G_i . D_i / ||G_i||; 1 for Zero rows by convention
  std::vector<double> g_norm;     // after the zeroing rule
  std::vector<double> threshold;  // 2 - 2 cos_theta; branch one applies for gamma >= threshold
  EmbeddingMatrix direction;      // G_i / ||G_i||, zero when undefined
  EmbeddingMatrix tangent;        // Z_i, zero when undefined
  std::size_t zeroed_count = 0;   // records zeroed by the negative-alignment rule

  std::size_t rows() const { return kind.size(); }
};

/// Requires row-normalized data.
SphereGeometry prepare_geometry(const EmbeddingMatrix& data, const AggregateMatrix& g);

/// Delta_i = G_i/||G_i|| - D_i               when gamma >= 2 - 2 cos(theta_i),
///         = sqrt(gamma(4-gamma))/2 Z_i - gamma/2 D_i   otherwise.
/// Zero and parallel rows get Delta_i = 0.
EmbeddingMatrix maxs_n_delta(const SphereGeometry& geometry, const EmbeddingMatrix& data,
                             double gamma);

/// Single-row branches, exposed for continuity checks.
std::vector<double> sphere_branch_one(const SphereGeometry& geometry,
                                      const EmbeddingMatrix& data, std::size_t i);
std::vector<double> sphere_branch_two(const SphereGeometry& geometry,
                                      const EmbeddingMatrix& data, std::size_t i,
                                      double gamma);

/// Disjoint open intervals inside (0, 4).
using GammaIntervalSet = IntervalUnion;

/// {gamma in (0, 4) : a*sqrt(gamma(4-gamma)) + b*gamma + c > 0}.
GammaIntervalSet solve_sqrt_quadratic(double a, double b, double c);

struct SphereIntervals {
  std::vector<GammaIntervalSet> per_query;  // one per validation query
  std::size_t count_at_zero = 0;
};

/// Exact per-query feasibility sets over gamma in (0, 4). Single-label only.
SphereIntervals sphere_feasibility_sets(const EmbeddingMatrix& val_queries,
                                        const LabelSet& val_labels,
                                        const EmbeddingMatrix& data,
                                        const SphereGeometry& geometry);

SweepResult select_gamma_n_exact(const EmbeddingMatrix& data, const SphereGeometry& geometry,
                                 const EmbeddingMatrix& val_queries,
                                 const LabelSet& val_labels);

struct GridSelection {
  double gamma_star = 0.0;
  std::size_t correct_count = 0;
  std::size_t count_at_zero = 0;
};

/// Evaluates gamma in {0} u {4k/grid_points : k = 1..grid_points}; smallest
/// gamma wins ties. Supports multi-label validation sets.
GridSelection select_gamma_n_grid(const EmbeddingMatrix& data, const SphereGeometry& geometry,
                                  const EmbeddingMatrix& val_queries,
                                  const LabelSet& val_labels, std::size_t grid_points);

struct NudgeNOptions {
  bool weighted_labels = false;
  std::size_t grid_points = 1024;
};

FineTuneResult nudge_n_grid(const EmbeddingMatrix& data, const EmbeddingMatrix& train_queries,
                            const LabelSet& train_labels, const EmbeddingMatrix& val_queries,
                            const LabelSet& val_labels, const NudgeNOptions& options = {});

FineTuneResult nudge_n_exact(const EmbeddingMatrix& data, const EmbeddingMatrix& train_queries,
                             const LabelSet& train_labels, const EmbeddingMatrix& val_queries,
                             const LabelSet& val_labels, const NudgeNOptions& options = {});

}  // namespace nudge
