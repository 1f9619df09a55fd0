#include <doctest.h>

#include <cmath>
#include <limits>

#include "instances.hpp"
#include "nudge/error.hpp"
#include "nudge/nudge_m.hpp"
#include "oracles.hpp"

using namespace nudge;
using nudge::testing::Rng;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Example {
  EmbeddingMatrix data = EmbeddingMatrix::from_rows({{1, 0}, {0, 1}});
  EmbeddingMatrix train_q = EmbeddingMatrix::from_rows({{0, 1}});
  LabelSet train_labels{{0, 0}};
  EmbeddingMatrix val_q = EmbeddingMatrix::from_rows({{0, 1}});
  LabelSet val_labels{{0, 0}};
};

nudge::testing::RandomShape random_shape(Rng& rng) {
  nudge::testing::RandomShape shape;
  shape.n = 2 + rng.index(49);
  shape.d = 2 + rng.index(7);
  shape.n_train = 1 + rng.index(40);
  shape.n_val = 1 + rng.index(20);
  shape.noise = rng.uniform(0.3, 1.2);
  return shape;
}

}  // namespace

TEST_SUITE("nudge_m") {
  TEST_CASE("closed-form magnitude update") {
    const AggregateMatrix g(EmbeddingMatrix::from_rows({{3, 4}, {0, 0}}));
    const auto delta = maxs_m_delta(g, 1.0);
    CHECK(delta(0, 0) == doctest::Approx(0.6));
    CHECK(delta(0, 1) == doctest::Approx(0.8));
    CHECK(delta(1, 0) == 0.0);
    CHECK(delta(1, 1) == 0.0);
    CHECK(maxs_m_delta(g, 0.0) == EmbeddingMatrix(2, 2));
    CHECK_THROWS_AS(maxs_m_delta(g, -0.5), InvalidArgument);
  }

  TEST_CASE("update rows have norm 0 or gamma and beat random feasible moves") {
    Rng rng(21);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t d = 1 + rng.index(8);
      const auto g_rows = nudge::testing::random_matrix(rng, 1, d, false);
      const double gamma = rng.uniform(0.0, 3.0);
      const AggregateMatrix g(g_rows);
      const auto delta = maxs_m_delta(g, gamma);
      CHECK(std::abs(norm(delta.row(0)) - gamma) <= 1e-9);
      const double best = dot(g.row(0), delta.row(0));
      for (int s = 0; s < 1000; ++s) {
        auto v = rng.unit_vector(d);
        const double r = gamma * rng.uniform();
        double obj = 0.0;
        for (std::size_t k = 0; k < d; ++k) obj += g.row(0)[k] * r * v[k];
        CHECK(best >= obj - 1e-9);
      }
    }
  }

  TEST_CASE("feasibility interval examples") {
    const auto data = EmbeddingMatrix::from_rows({{1, 0}, {0, 1}});
    const AggregateMatrix g(EmbeddingMatrix::from_rows({{0, 1}, {0, 0}}));
    const auto found = feasibility_intervals(EmbeddingMatrix::from_rows({{0, 1}}), LabelSet{{0, 0}},
                                             data, g);
    REQUIRE(found.intervals.size() == 1);
    CHECK(found.intervals[0].interval == Interval{1.0, kInf});
    CHECK(found.count_at_zero == 0);

    const AggregateMatrix zero(EmbeddingMatrix(2, 2));
    const auto easy = feasibility_intervals(EmbeddingMatrix::from_rows({{1, 0}}), LabelSet{{0, 0}},
                                            data, zero);
    REQUIRE(easy.intervals.size() == 1);
    CHECK(easy.intervals[0].interval == Interval{0.0, kInf});
    CHECK(easy.count_at_zero == 1);
  }

  TEST_CASE("zero denominator with a tie is infeasible") {
    const auto data = EmbeddingMatrix::from_rows({{1, 0}, {1, 0}});
    const AggregateMatrix zero(EmbeddingMatrix(2, 2));
    const auto found = feasibility_intervals(EmbeddingMatrix::from_rows({{1, 0}}), LabelSet{{0, 0}},
                                             data, zero);
    CHECK(found.intervals.empty());
    CHECK(found.count_at_zero == 0);
  }

  TEST_CASE("interval membership matches direct correctness") {
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
      nudge::testing::RandomShape shape{12, 4, 15, 5, 0, 0.9, true};
      const auto inst = nudge::testing::random_instance(rng, shape);
      const auto g = compute_aggregates(inst.train_queries, inst.train_labels, 12, false);
      const auto found = feasibility_intervals(inst.val_queries, inst.val_labels, inst.data, g);
      std::vector<std::optional<Interval>> per_query(5);
      for (const auto& qi : found.intervals) per_query[qi.query] = qi.interval;
      for (int s = 0; s < 1000; ++s) {
        const double gamma = rng.uniform(1e-6, 4.0);
        const auto moved = add_rows(inst.data, maxs_m_delta(g, gamma));
        const auto c = correctness(inst.val_queries, inst.val_labels, moved);
        for (std::size_t i = 0; i < 5; ++i) {
          const auto& iv = per_query[i];
          if (iv && (std::abs(gamma - iv->lo) <= 1e-9 * std::max(1.0, iv->lo) ||
                     std::abs(gamma - iv->hi) <= 1e-9 * std::max(1.0, iv->hi))) {
            continue;
          }
          CHECK(c.correct[i] == (iv && iv->contains(gamma)));
        }
      }
    }
  }

  TEST_CASE("sweep examples") {
    const auto r = max_overlap({{0, 2}, {1, 3}, {2.5, 4}}, 0);
    CHECK(r.correct_count == 2);
    CHECK(r.stabbing_count == 2);
    REQUIRE(r.best_region);
    CHECK(*r.best_region == Interval{1, 2});
    CHECK(r.gamma_star == doctest::Approx(1.5));

    const auto u = max_overlap({{1, kInf}}, 0);
    CHECK(u.correct_count == 1);
    CHECK(u.gamma_star == doctest::Approx(2.0));

    // Median finite width sets the step past an unbounded region's start.
    const auto w = max_overlap({{5, kInf}, {0, 1}, {0.5, 3.5}, {6, kInf}, {0.2, 0.4}}, 0);
    CHECK(w.correct_count == 2);
    CHECK(w.gamma_star == doctest::Approx(0.3));

    const auto empty = max_overlap({}, 3);
    CHECK(empty.gamma_star == 0.0);
    CHECK(empty.correct_count == 3);
  }

  TEST_CASE("sweep tie rules") {
    // Two regions with count 1: the lower one wins.
    const auto low = max_overlap({{3, 4}, {1, 2}}, 0);
    CHECK(low.gamma_star == doctest::Approx(1.5));
    // gamma = 0 wins ties against positive regions.
    const auto zero = max_overlap({{1, 2}}, 1);
    CHECK(zero.gamma_star == 0.0);
    CHECK(zero.correct_count == 1);
    // Touching open intervals do not overlap.
    const auto touch = max_overlap({{0, 1}, {1, 2}}, 0);
    CHECK(touch.stabbing_count == 1);
  }

  TEST_CASE("sweep matches endpoint enumeration") {
    Rng rng(41);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<Interval> intervals;
      for (int k = 0; k < 200; ++k) {
        const double lo = std::floor(rng.uniform(0.0, 50.0) * 4.0) / 4.0;  // shared endpoints
        const double hi = rng.uniform() < 0.1 ? kInf : lo + 0.25 + std::floor(rng.uniform(0.0, 10.0) * 4.0) / 4.0;
        intervals.push_back({lo, hi});
      }
      const auto r = max_overlap(intervals, 0);
      CHECK(r.stabbing_count == oracle::max_stabbing_by_enumeration(intervals));
      CHECK(oracle::stabbing_count(intervals, r.gamma_star) == r.correct_count);
    }
  }

  TEST_CASE("fine-tuning example") {
    const Example ex;
    const auto result = nudge_m(ex.data, ex.train_q, ex.train_labels, ex.val_q, ex.val_labels);
    CHECK(result.report.gamma_star == doctest::Approx(2.0));
    CHECK(result.data(0, 0) == doctest::Approx(1.0));
    CHECK(result.data(0, 1) == doctest::Approx(2.0));
    CHECK(result.data.row(1)[0] == 0.0);
    CHECK(result.data.row(1)[1] == 1.0);
    CHECK(result.report.val_correct_before == 0);
    CHECK(result.report.val_correct_after == 1);
    const auto g = compute_aggregates(ex.train_q, ex.train_labels, 2, false);
    const auto best = oracle::gamma_grid_oracle(ex.data, g, ex.val_q, ex.val_labels,
                                                oracle::uniform_grid(4.0, 4096),
                                                oracle::Update::Magnitude);
    CHECK(best.best_count == 1);
    CHECK(best.best_gamma > 1.0);
  }

  TEST_CASE("already correct validation stays correct") {
    const auto data = EmbeddingMatrix::from_rows({{1, 0}, {0, 1}});
    const auto q = EmbeddingMatrix::from_rows({{1, 0.1}, {0.1, 1}});
    const LabelSet labels{{0, 0}, {1, 1}};
    const auto result = nudge_m(data, q, labels, q, labels);
    CHECK(result.report.val_correct_before == 2);
    CHECK(result.report.val_correct_after == 2);
    // gamma = 0 ties every positive region, so nothing moves.
    CHECK(result.report.gamma_star == 0.0);
    CHECK(result.data == data);
  }

  TEST_CASE("count matches the enumeration oracle on random instances") {
    Rng rng(51);
    for (int trial = 0; trial < 30; ++trial) {
      const auto shape = random_shape(rng);
      const auto inst = nudge::testing::random_instance(rng, shape);
      oracle::require_desk_scale(shape.n, shape.d, shape.n_val);
      const auto result = nudge_m(inst.data, inst.train_queries, inst.train_labels,
                                  inst.val_queries, inst.val_labels);
      const auto g = compute_aggregates(inst.train_queries, inst.train_labels, shape.n, false);
      auto candidates =
          oracle::magnitude_candidates(inst.data, g, inst.val_queries, inst.val_labels);
      const auto grid = oracle::uniform_grid(10.0, 10000);
      candidates.insert(candidates.end(), grid.begin(), grid.end());
      const auto best = oracle::gamma_grid_oracle(inst.data, g, inst.val_queries, inst.val_labels,
                                                  candidates, oracle::Update::Magnitude);
      CHECK(result.report.val_correct_after == best.best_count);
      CHECK(result.report.val_correct_after >= result.report.val_correct_before);
      CHECK(result.report.predicted_correct == result.report.val_correct_after);
    }
  }

  TEST_CASE("multi-label validation is rejected") {
    const Example ex;
    CHECK_THROWS_WITH_AS(nudge_m(ex.data, ex.train_q, ex.train_labels, ex.val_q,
                                 LabelSet{{0, 0, 2.0}, {0, 1, 1.0}}),
                         doctest::Contains("grid"), InvalidArgument);
  }

  TEST_CASE("dimension mismatch is reported") {
    const Example ex;
    CHECK_THROWS_WITH_AS(nudge_m(ex.data, EmbeddingMatrix::from_rows({{0, 1, 0}}), ex.train_labels,
                                 ex.val_q, ex.val_labels),
                         doctest::Contains("training queries"), InvalidArgument);
  }
}
