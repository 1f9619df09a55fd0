#include "nudge/iterative.hpp"

#include <cmath>
#include <string>

#include "checks.hpp"
#include "nudge/error.hpp"
#include "nudge/parallel.hpp"

namespace nudge {

namespace {

constexpr double kNormDrift = 1e-6;

bool is_checkpoint(std::size_t step, const IterativeConfig& config) {
  return step % config.checkpoint_every == 0 || step == config.iters;
}

FineTuneReport base_report(const char* method, const EmbeddingMatrix& data,
                           const EmbeddingMatrix& val_queries, const IterativeConfig& config) {
  FineTuneReport report;
  report.method = method;
  report.n = data.rows();
  report.d = data.dim();
  report.n_val = val_queries.rows();
  report.alpha = config.alpha;
  report.iters = config.iters;
  report.checkpoint_every = config.checkpoint_every;
  return report;
}

void check_inputs(const EmbeddingMatrix& data, const AggregateMatrix& g,
                  const EmbeddingMatrix& val_queries, const LabelSet& val_labels) {
  detail::require_aggregate_shape(g, data);
  detail::require_same_dim(val_queries, "validation queries", data, "data");
  val_labels.validate(val_queries.rows(), data.rows());
}

}  // namespace

void IterativeConfig::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw InvalidArgument("alpha must be a positive finite number, got " + std::to_string(alpha));
  }
  if (iters < 1) throw InvalidArgument("iters must be at least 1");
  if (checkpoint_every < 1) throw InvalidArgument("checkpoint_every must be at least 1");
}

FineTuneResult nudge_im(const EmbeddingMatrix& data, const AggregateMatrix& g,
                        const EmbeddingMatrix& val_queries, const LabelSet& val_labels,
                        IterativeConfig config) {
  config.normalize_each_step = false;
  config.validate();
  check_inputs(data, g, val_queries, val_labels);

  FineTuneResult result;
  result.report = base_report("im", data, val_queries, config);
  FineTuneReport& report = result.report;
  PhaseTimer timer(report);

  const EmbeddingMatrix directions = g.unit_directions();
  // The gradient is constant, so the state after `step` steps is
  // D + (step * alpha) * G/||G|| and only checkpoints need materializing.
  auto state_at = [&](std::size_t step) {
    const double scale = static_cast<double>(step) * config.alpha;
    EmbeddingMatrix out = data;
    for (std::size_t i = 0; i < out.rows(); ++i) {
      if (g.row_norm(i) == 0.0) continue;
      auto dst = out.row(i);
      auto dir = directions.row(i);
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * dir[k];
    }
    return out;
  };

  std::size_t best_step = 0;
  std::size_t best_count = correctness(val_queries, val_labels, data).count;
  report.val_correct_before = best_count;
  for (std::size_t step = 1; step <= config.iters; ++step) {
    if (!is_checkpoint(step, config)) continue;
    const std::size_t count = correctness(val_queries, val_labels, state_at(step)).count;
    if (count > best_count) {
      best_count = count;
      best_step = step;
    }
  }
  timer.lap("iterate");

  result.data = best_step == 0 ? data : state_at(best_step);
  report.best_step = best_step;
  report.gamma_star = static_cast<double>(best_step) * config.alpha;
  report.predicted_correct = best_count;
  report.val_correct_after = best_count;
  timer.lap("apply");
  return result;
}

FineTuneResult nudge_in(const EmbeddingMatrix& input, const AggregateMatrix& g,
                        const EmbeddingMatrix& val_queries, const LabelSet& val_labels,
                        IterativeConfig config) {
  config.normalize_each_step = true;
  config.validate();
  check_inputs(input, g, val_queries, val_labels);

  FineTuneResult result;
  result.report = base_report("in", input, val_queries, config);
  FineTuneReport& report = result.report;
  PhaseTimer timer(report);

  EmbeddingMatrix state = input;
  if (!state.is_normalized(kNormDrift)) {
    state = normalize_rows(state);
    report.input_renormalized = true;
  }
  const EmbeddingMatrix directions = g.unit_directions();

  std::size_t best_step = 0;
  std::size_t best_count = correctness(val_queries, val_labels, state).count;
  EmbeddingMatrix best = state;
  report.val_correct_before = best_count;

  for (std::size_t step = 1; step <= config.iters; ++step) {
    parallel_for(state.rows(), [&](std::size_t i) {
      if (g.row_norm(i) == 0.0) return;
      auto row = state.row(i);
      auto dir = directions.row(i);
      for (std::size_t k = 0; k < row.size(); ++k) row[k] += config.alpha * dir[k];
      const double len = norm(row);
      for (double& v : row) v /= len;
      if (std::abs(norm(row) - 1.0) > kNormDrift) {
        throw Error("row " + std::to_string(i) + " drifted off the unit sphere");
      }
    });
    if (!is_checkpoint(step, config)) continue;
    const std::size_t count = correctness(val_queries, val_labels, state).count;
    if (count > best_count) {
      best_count = count;
      best_step = step;
      best = state;
    }
  }
  timer.lap("iterate");

  result.data = std::move(best);
  report.best_step = best_step;
  report.predicted_correct = best_count;
  report.val_correct_after = best_count;
  return result;
}

}  // namespace nudge
