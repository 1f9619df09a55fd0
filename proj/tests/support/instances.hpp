#pragma once

// Seeded instance generators for tests. Gaussian draws use a hand-rolled
// Box-Muller on mt19937_64 so generated data is identical across standard
// libraries.

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "nudge/core.hpp"

namespace nudge::testing {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();                                  // [0, 1)
  double uniform(double lo, double hi);              // [lo, hi)
  std::size_t index(std::size_t bound);              // [0, bound)
  double normal();                                   // N(0, 1)
  std::vector<double> normal_vector(std::size_t d);  // iid N(0, 1)
  std::vector<double> unit_vector(std::size_t d);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

EmbeddingMatrix random_matrix(Rng& rng, std::size_t rows, std::size_t d, bool unit_rows);

struct Instance {
  EmbeddingMatrix data;
  EmbeddingMatrix train_queries;
  LabelSet train_labels;
  EmbeddingMatrix val_queries;
  LabelSet val_labels;
  EmbeddingMatrix test_queries;
  LabelSet test_labels;
};

struct RandomShape {
  std::size_t n = 10;
  std::size_t d = 4;
  std::size_t n_train = 20;
  std::size_t n_val = 10;
  std::size_t n_test = 0;
  double noise = 0.8;      // query = normalize(D_target + noise * N(0, I))
  bool unit_data = true;
};

/// Single-label instance: every query is a noisy copy of a random target
/// record, so some are answered correctly before fine-tuning and some not.
Instance random_instance(Rng& rng, const RandomShape& shape);

struct ClusterShape {
  std::size_t n = 2000;
  std::size_t d = 32;
  std::size_t train_per_record = 8;
  std::size_t val_per_record = 1;
  std::size_t test_per_record = 1;
  double sigma = 0.3;
};

/// One unit cluster center per record. The record and all its queries are
/// normalize(center + N(0, sigma^2 I)) drawn independently, so train,
/// validation and test queries are disjoint.
Instance clustered_instance(std::uint64_t seed, const ClusterShape& shape);

}  // namespace nudge::testing
