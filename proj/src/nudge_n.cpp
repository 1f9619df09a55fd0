#include "nudge/nudge_n.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "checks.hpp"
#include "nudge/error.hpp"
#include "nudge/parallel.hpp"

namespace nudge {

namespace {

// Relative size of the tangential component of G_i below which G_i is
// treated as parallel to D_i.
constexpr double kParallelTolerance = 1e-12;
// Candidate roots closer than this are one root.
constexpr double kRootMergeTolerance = 1e-12;

double sqrt_term(double gamma) {
  return std::sqrt(std::max(0.0, gamma * (kMaxSphereGamma - gamma)));
}

double sqrt_quadratic(double a, double b, double c, double gamma) {
  return a * sqrt_term(gamma) + b * gamma + c;
}

void require_gamma_in_domain(double gamma) {
  if (!(gamma >= 0.0 && gamma <= kMaxSphereGamma)) {
    throw InvalidArgument("gamma must lie in [0, 4] for sphere fine-tuning, got " +
                          std::to_string(gamma));
  }
}

// Sign of f on each piece between consecutive cut points, read at midpoints.
GammaIntervalSet by_evaluation(double a, double b, double c, std::vector<double> cuts) {
  cuts.push_back(0.0);
  cuts.push_back(kMaxSphereGamma);
  std::sort(cuts.begin(), cuts.end());
  std::vector<Interval> parts;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double lo = cuts[k];
    const double hi = cuts[k + 1];
    if (!(lo < hi)) continue;
    if (sqrt_quadratic(a, b, c, lo + 0.5 * (hi - lo)) > 0.0) parts.push_back({lo, hi});
  }
  return GammaIntervalSet::from(std::move(parts));
}

GammaIntervalSet whole_domain() { return GammaIntervalSet(Interval{0.0, kMaxSphereGamma}); }

// Sign of f on (0, 4) when f has no sign change there: f(0) = c decides,
// then f(4) = 4b + c, then the shape of a*sqrt(.) when b = c = 0.
bool positive_without_roots(double a, double b, double c) {
  if (c != 0.0) return c > 0.0;
  if (b != 0.0) return b > 0.0;
  return a > 0.0;
}

// One record's score as a function of gamma:
//   gamma <  threshold: a*sqrt(gamma(4-gamma)) + b*gamma + c
//   gamma >= threshold: after
struct ScoreForm {
  double threshold = 0.0;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double after = 0.0;

  double at(double gamma, double s) const {
    return gamma < threshold ? a * s + b * gamma + c : after;
  }
};

std::vector<ScoreForm> query_forms(std::span<const double> q, const EmbeddingMatrix& data,
                                   const SphereGeometry& geometry) {
  std::vector<ScoreForm> forms(data.rows());
  for (std::size_t j = 0; j < data.rows(); ++j) {
    const double s_data = dot(q, data.row(j));
    ScoreForm& f = forms[j];
    if (geometry.kind[j] != RecordKind::Regular) {
      f.after = s_data;
      continue;
    }
    f.threshold = geometry.threshold[j];
    f.a = 0.5 * dot(q, geometry.tangent.row(j));
    f.b = -0.5 * s_data;
    f.c = s_data;
    f.after = dot(q, geometry.direction.row(j));
  }
  return forms;
}

// {gamma in (0, 4) : score_y(gamma) > score_j(gamma)}.
GammaIntervalSet pair_feasibility(const ScoreForm& y, const ScoreForm& j) {
  std::array<double, 4> cuts{0.0, std::min(y.threshold, j.threshold),
                             std::max(y.threshold, j.threshold), kMaxSphereGamma};
  std::vector<Interval> parts;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double lo = std::clamp(cuts[k], 0.0, kMaxSphereGamma);
    const double hi = std::clamp(cuts[k + 1], 0.0, kMaxSphereGamma);
    if (!(lo < hi)) continue;
    const double mid = lo + 0.5 * (hi - lo);
    const bool y_curved = mid < y.threshold;
    const bool j_curved = mid < j.threshold;
    const double a = (y_curved ? y.a : 0.0) - (j_curved ? j.a : 0.0);
    const double b = (y_curved ? y.b : 0.0) - (j_curved ? j.b : 0.0);
    const double c = (y_curved ? y.c : y.after) - (j_curved ? j.c : j.after);
    const auto piece = solve_sqrt_quadratic(a, b, c).clip(lo, hi);
    parts.insert(parts.end(), piece.parts().begin(), piece.parts().end());
  }
  auto out = GammaIntervalSet::from(std::move(parts));
  // Score functions are continuous, so a piece boundary where the difference
  // is positive belongs to the set and joins its neighbours.
  for (double boundary : {cuts[1], cuts[2]}) {
    if (!(boundary > 0.0 && boundary < kMaxSphereGamma)) continue;
    const double s = sqrt_term(boundary);
    if (y.at(boundary, s) - j.at(boundary, s) > 0.0) out.join_at(boundary);
  }
  return out;
}

struct Prepared {
  EmbeddingMatrix data;
  bool renormalized = false;
};

Prepared normalized_input(const EmbeddingMatrix& data) {
  if (data.is_normalized(1e-6)) return {data, false};
  return {normalize_rows(data), true};
}

}  // namespace

SphereGeometry prepare_geometry(const EmbeddingMatrix& data, const AggregateMatrix& g) {
  detail::require_aggregate_shape(g, data);
  if (!data.is_normalized(1e-6)) {
    throw InvalidArgument("sphere fine-tuning requires unit-norm data rows");
  }
  const std::size_t n = data.rows();
  const std::size_t d = data.dim();
  SphereGeometry geo;
  geo.kind.assign(n, RecordKind::Zero);
  geo.cos_theta.assign(n, 1.0);
  geo.g_norm.assign(n, 0.0);
  geo.threshold.assign(n, 0.0);
  geo.direction = EmbeddingMatrix(n, d);
  geo.tangent = EmbeddingMatrix(n, d);

  for (std::size_t i = 0; i < n; ++i) {
    const auto di = data.row(i);
    const auto gi = g.row(i);
    const double len = g.row_norm(i);
    if (len == 0.0) continue;
    const double along = dot(di, gi);
    if (along < 0.0) {
      ++geo.zeroed_count;
      continue;
    }
    geo.g_norm[i] = len;
    geo.cos_theta[i] = std::clamp(along / len, -1.0, 1.0);

    auto unit = geo.direction.row(i);
    for (std::size_t k = 0; k < d; ++k) unit[k] = gi[k] / len;

    // Tangential part of G_i, orthogonalized twice for accuracy at small angles.
    std::vector<double> p(gi.begin(), gi.end());
    for (int pass = 0; pass < 2; ++pass) {
      const double proj = dot(di, p);
      for (std::size_t k = 0; k < d; ++k) p[k] -= proj * di[k];
    }
    const double p_len = norm(p);
    if (p_len <= kParallelTolerance * len) {
      geo.kind[i] = RecordKind::Parallel;
      geo.cos_theta[i] = 1.0;
      continue;
    }
    geo.kind[i] = RecordKind::Regular;
    auto z = geo.tangent.row(i);
    for (std::size_t k = 0; k < d; ++k) z[k] = p[k] / p_len;

    // 2 - 2 cos(theta) = ||G_i/||G_i|| - D_i||^2, which keeps precision when
    // theta is small.
    double t = 0.0;
    for (std::size_t k = 0; k < d; ++k) t += (unit[k] - di[k]) * (unit[k] - di[k]);
    geo.threshold[i] = t;
  }
  return geo;
}

std::vector<double> sphere_branch_one(const SphereGeometry& geometry,
                                      const EmbeddingMatrix& data, std::size_t i) {
  std::vector<double> delta(data.dim(), 0.0);
  if (geometry.kind[i] != RecordKind::Regular) return delta;
  const auto di = data.row(i);
  const auto unit = geometry.direction.row(i);
  for (std::size_t k = 0; k < delta.size(); ++k) delta[k] = unit[k] - di[k];
  return delta;
}

std::vector<double> sphere_branch_two(const SphereGeometry& geometry,
                                      const EmbeddingMatrix& data, std::size_t i,
                                      double gamma) {
  require_gamma_in_domain(gamma);
  std::vector<double> delta(data.dim(), 0.0);
  if (geometry.kind[i] != RecordKind::Regular) return delta;
  const auto di = data.row(i);
  const auto z = geometry.tangent.row(i);
  const double along_z = 0.5 * sqrt_term(gamma);
  const double along_d = 0.5 * gamma;
  for (std::size_t k = 0; k < delta.size(); ++k) delta[k] = along_z * z[k] - along_d * di[k];
  return delta;
}

EmbeddingMatrix maxs_n_delta(const SphereGeometry& geometry, const EmbeddingMatrix& data,
                             double gamma) {
  require_gamma_in_domain(gamma);
  if (geometry.rows() != data.rows()) {
    throw InvalidArgument("geometry has " + std::to_string(geometry.rows()) +
                          " records, data has " + std::to_string(data.rows()));
  }
  EmbeddingMatrix delta(data.rows(), data.dim());
  for (std::size_t i = 0; i < data.rows(); ++i) {
    if (geometry.kind[i] != RecordKind::Regular) continue;
    const auto row = gamma >= geometry.threshold[i] ? sphere_branch_one(geometry, data, i)
                                                    : sphere_branch_two(geometry, data, i, gamma);
    std::copy(row.begin(), row.end(), delta.row(i).begin());
  }
  return delta;
}

GammaIntervalSet solve_sqrt_quadratic(double a, double b, double c) {
  if (a == 0.0 && b == 0.0) return c > 0.0 ? whole_domain() : GammaIntervalSet{};
  if (a == 0.0) {
    const double root = -c / b;
    return b > 0.0 ? GammaIntervalSet(Interval{root, kMaxSphereGamma}).clip(0.0, kMaxSphereGamma)
                   : GammaIntervalSet(Interval{0.0, root}).clip(0.0, kMaxSphereGamma);
  }

  // Squaring a*sqrt(g(4-g)) = -(b g + c) gives
  //   (a^2 + b^2) g^2 - 2 (2a^2 - bc) g + c^2 = 0,
  // with discriminant a^2 (4a^2 - 4bc - c^2).
  const double den = a * a + b * b;
  const double half_sum = 2.0 * a * a - b * c;
  const double disc = 4.0 * a * a - 4.0 * b * c - c * c;
  if (disc < 0.0) {
    return positive_without_roots(a, b, c) ? whole_domain() : GammaIntervalSet{};
  }
  const double w = std::abs(a) * std::sqrt(disc);
  // Larger-magnitude root directly, the other from the product c^2 / den.
  const double far = (half_sum + std::copysign(w, half_sum)) / den;
  const double near = far != 0.0 ? (c * c / den) / far : 0.0;

  std::vector<double> candidates;
  std::vector<double> roots;
  for (double r : {near, far}) {
    if (!(r > 0.0 && r < kMaxSphereGamma)) continue;
    candidates.push_back(r);
    // Squaring admits roots of a*s = +(b g + c) as well; a genuine root has
    // a*s and b g + c of opposite sign (or either zero).
    const double u = a * sqrt_term(r);
    const double v = b * r + c;
    if (u * v <= 0.0) roots.push_back(r);
  }
  std::sort(roots.begin(), roots.end());

  const bool tangent =
      roots.size() == 2 &&
      roots[1] - roots[0] <= kRootMergeTolerance * std::max(1.0, roots[1]);
  if (roots.empty() || tangent) {
    if (!positive_without_roots(a, b, c)) return {};
    if (!tangent) return whole_domain();
    const double r = roots[0];
    return GammaIntervalSet::from({{0.0, r}, {r, kMaxSphereGamma}});
  }
  if (roots.size() == 2) {
    if (c < 0.0) return GammaIntervalSet(Interval{roots[0], roots[1]});
    if (c > 0.0) {
      return GammaIntervalSet::from({{0.0, roots[0]}, {roots[1], kMaxSphereGamma}});
    }
    // Two interior roots force c != 0; reaching here means rounding produced
    // an inconsistent root set.
    return by_evaluation(a, b, c, candidates);
  }
  const double r = roots[0];
  if (c > 0.0 || (c == 0.0 && a > 0.0)) return GammaIntervalSet(Interval{0.0, r});
  if (c < 0.0 || (c == 0.0 && a < 0.0)) return GammaIntervalSet(Interval{r, kMaxSphereGamma});
  return by_evaluation(a, b, c, candidates);
}

SphereIntervals sphere_feasibility_sets(const EmbeddingMatrix& val_queries,
                                        const LabelSet& val_labels,
                                        const EmbeddingMatrix& data,
                                        const SphereGeometry& geometry) {
  detail::require_same_dim(val_queries, "validation queries", data, "data");
  val_labels.validate(val_queries.rows(), data.rows());
  detail::require_single_label(val_labels, val_queries.rows(), "exact sphere selection");
  if (geometry.rows() != data.rows()) {
    throw InvalidArgument("geometry does not match data");
  }
  const auto targets = val_labels.single_targets(val_queries.rows());

  SphereIntervals out;
  out.per_query.resize(val_queries.rows());
  std::vector<char> at_zero(val_queries.rows(), 0);

  parallel_for(val_queries.rows(), [&](std::size_t i) {
    const auto forms = query_forms(val_queries.row(i), data, geometry);
    const std::size_t y = targets[i];
    const ScoreForm& fy = forms[y];

    bool zero_ok = true;
    const double y_at_zero = fy.at(0.0, 0.0);
    for (std::size_t j = 0; j < forms.size(); ++j) {
      if (j != y && !(y_at_zero > forms[j].at(0.0, 0.0))) {
        zero_ok = false;
        break;
      }
    }
    at_zero[i] = zero_ok ? 1 : 0;

    GammaIntervalSet feasible = whole_domain();
    for (std::size_t j = 0; j < forms.size() && !feasible.empty(); ++j) {
      if (j == y) continue;
      feasible = feasible.intersect(pair_feasibility(fy, forms[j]));
    }
    out.per_query[i] = std::move(feasible);
  });

  for (char z : at_zero) out.count_at_zero += static_cast<std::size_t>(z);
  return out;
}

SweepResult select_gamma_n_exact(const EmbeddingMatrix& data, const SphereGeometry& geometry,
                                 const EmbeddingMatrix& val_queries,
                                 const LabelSet& val_labels) {
  const auto sets = sphere_feasibility_sets(val_queries, val_labels, data, geometry);
  std::vector<Interval> intervals;
  for (const auto& s : sets.per_query) {
    intervals.insert(intervals.end(), s.parts().begin(), s.parts().end());
  }
  return max_overlap(intervals, sets.count_at_zero);
}

GridSelection select_gamma_n_grid(const EmbeddingMatrix& data, const SphereGeometry& geometry,
                                  const EmbeddingMatrix& val_queries,
                                  const LabelSet& val_labels, std::size_t grid_points) {
  if (grid_points < 2) {
    throw InvalidArgument("grid_points must be at least 2, got " + std::to_string(grid_points));
  }
  detail::require_same_dim(val_queries, "validation queries", data, "data");
  val_labels.validate(val_queries.rows(), data.rows());
  if (geometry.rows() != data.rows()) {
    throw InvalidArgument("geometry does not match data");
  }

  const std::size_t candidates = grid_points + 1;
  std::vector<double> gammas(candidates);
  std::vector<double> roots(candidates);
  for (std::size_t k = 0; k < candidates; ++k) {
    gammas[k] = kMaxSphereGamma * static_cast<double>(k) / static_cast<double>(grid_points);
    roots[k] = sqrt_term(gammas[k]);
  }

  const std::size_t nq = val_queries.rows();
  const bool single = val_labels.is_single_label(nq);
  const auto tiers = single ? std::vector<RelevanceTiers>{} : build_tiers(val_labels, nq);
  const auto targets = single ? val_labels.single_targets(nq) : std::vector<std::size_t>{};

  // flags[i * candidates + k]: query i correct at gammas[k].
  std::vector<char> flags(nq * candidates, 0);
  parallel_for(nq, [&](std::size_t i) {
    const auto forms = query_forms(val_queries.row(i), data, geometry);
    char* row = flags.data() + i * candidates;
    std::vector<double> scores;
    for (std::size_t k = 0; k < candidates; ++k) {
      const double gamma = gammas[k];
      const double s = roots[k];
      if (single) {
        const std::size_t y = targets[i];
        const double sy = forms[y].at(gamma, s);
        bool ok = true;
        for (std::size_t j = 0; j < forms.size(); ++j) {
          if (j != y && !(sy > forms[j].at(gamma, s))) {
            ok = false;
            break;
          }
        }
        row[k] = ok ? 1 : 0;
      } else {
        scores.resize(forms.size());
        for (std::size_t j = 0; j < forms.size(); ++j) scores[j] = forms[j].at(gamma, s);
        row[k] = ranked_correctly(scores, tiers[i]) ? 1 : 0;
      }
    }
  });

  GridSelection out;
  for (std::size_t k = 0; k < candidates; ++k) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < nq; ++i) count += static_cast<std::size_t>(flags[i * candidates + k]);
    if (k == 0) {
      out.count_at_zero = count;
      out.correct_count = count;
      out.gamma_star = 0.0;
    } else if (count > out.correct_count) {
      out.correct_count = count;
      out.gamma_star = gammas[k];
    }
  }
  return out;
}

namespace {

enum class Selector { Grid, Exact };

FineTuneResult run_sphere(const EmbeddingMatrix& input, const EmbeddingMatrix& train_queries,
                          const LabelSet& train_labels, const EmbeddingMatrix& val_queries,
                          const LabelSet& val_labels, const NudgeNOptions& options,
                          Selector selector) {
  detail::require_same_dim(train_queries, "training queries", input, "data");
  detail::require_same_dim(val_queries, "validation queries", input, "data");

  FineTuneResult result;
  FineTuneReport& report = result.report;
  report.method = selector == Selector::Grid ? "n" : "n-exact";
  report.n = input.rows();
  report.d = input.dim();
  report.n_train = train_queries.rows();
  report.n_val = val_queries.rows();
  report.weighted_labels = options.weighted_labels;
  if (selector == Selector::Grid) report.grid_points = options.grid_points;
  PhaseTimer timer(report);

  const Prepared prepared = normalized_input(input);
  const EmbeddingMatrix& data = prepared.data;
  report.input_renormalized = prepared.renormalized;

  const AggregateMatrix g =
      compute_aggregates(train_queries, train_labels, data.rows(), options.weighted_labels);
  const SphereGeometry geometry = prepare_geometry(data, g);
  timer.lap("aggregate");

  if (selector == Selector::Grid) {
    const auto sel =
        select_gamma_n_grid(data, geometry, val_queries, val_labels, options.grid_points);
    report.gamma_star = sel.gamma_star;
    report.predicted_correct = sel.correct_count;
    report.val_correct_before = sel.count_at_zero;
  } else {
    const auto sweep = select_gamma_n_exact(data, geometry, val_queries, val_labels);
    report.gamma_star = sweep.gamma_star;
    report.predicted_correct = sweep.correct_count;
    report.val_correct_before = sweep.count_at_zero;
  }
  timer.lap("select_gamma");

  result.data = add_rows(data, maxs_n_delta(geometry, data, report.gamma_star));
  timer.lap("apply");

  report.val_correct_after = correctness(val_queries, val_labels, result.data).count;
  if (report.val_correct_after < report.val_correct_before) {
    report.fell_back_to_zero = true;
    report.gamma_star = 0.0;
    report.val_correct_after = report.val_correct_before;
    result.data = data;
  }
  timer.lap("validate");
  return result;
}

}  // namespace

FineTuneResult nudge_n_grid(const EmbeddingMatrix& data, const EmbeddingMatrix& train_queries,
                            const LabelSet& train_labels, const EmbeddingMatrix& val_queries,
                            const LabelSet& val_labels, const NudgeNOptions& options) {
  return run_sphere(data, train_queries, train_labels, val_queries, val_labels, options,
                    Selector::Grid);
}

FineTuneResult nudge_n_exact(const EmbeddingMatrix& data, const EmbeddingMatrix& train_queries,
                             const LabelSet& train_labels, const EmbeddingMatrix& val_queries,
                             const LabelSet& val_labels, const NudgeNOptions& options) {
  return run_sphere(data, train_queries, train_labels, val_queries, val_labels, options,
                    Selector::Exact);
}

}  // namespace nudge
