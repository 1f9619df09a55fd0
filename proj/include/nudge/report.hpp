#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nudge/core.hpp"

namespace nudge {

/// Summary of one fine-tuning run. Everything except timings_ms is a pure
/// function of the inputs and configuration.
struct FineTuneReport {
  std::string method;
  double gamma_star = 0.0;
  std::size_t val_correct_before = 0;
  std::size_t val_correct_after = 0;
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t n_train = 0;
  std::size_t n_val = 0;

  // Count the selector expected at gamma_star (stabbing count or grid count).
  std::size_t predicted_correct = 0;
  // Set when the input data rows were renormalized before a sphere method.
  bool input_renormalized = false;
  // Set when the selected gamma measured worse than gamma = 0 and was
  // replaced by it.
  bool fell_back_to_zero = false;

  // Effective configuration.
  bool weighted_labels = false;
  std::optional<std::size_t> grid_points;
  std::optional<double> alpha;
  std::optional<std::size_t> iters;
  std::optional<std::size_t> checkpoint_every;
  std::optional<std::size_t> best_step;

  std::vector<std::pair<std::string, double>> timings_ms;
};

struct FineTuneResult {
  EmbeddingMatrix data;
  FineTuneReport report;
};

/// Records elapsed wall time between successive lap() calls.
class PhaseTimer {
 public:
  explicit PhaseTimer(FineTuneReport& report)
      : report_(report), last_(std::chrono::steady_clock::now()) {}

  void lap(std::string phase) {
    const auto now = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(now - last_).count();
    report_.timings_ms.emplace_back(std::move(phase), ms);
    last_ = now;
  }

 private:
  FineTuneReport& report_;
  std::chrono::steady_clock::time_point last_;
};

}  // namespace nudge
