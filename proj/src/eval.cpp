#include "nudge/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "checks.hpp"
#include "nudge/error.hpp"
#include "nudge/parallel.hpp"

namespace nudge {

namespace {

void check_k(std::size_t k, std::size_t n) {
  if (k < 1 || k > n) {
    throw InvalidArgument("k must be between 1 and the number of records (" +
                          std::to_string(n) + "), got " + std::to_string(k));
  }
}

std::vector<std::size_t> ranked_prefix(std::span<const double> scores, std::size_t k) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
                    });
  order.resize(k);
  return order;
}

double discount(std::size_t rank) { return 1.0 / std::log2(static_cast<double>(rank) + 1.0); }

struct QueryMetrics {
  double recall_k = 0.0;
  double ndcg_k = 0.0;
  double recall_1 = 0.0;
};

QueryMetrics score_query(const std::vector<std::size_t>& ranked,
                         const std::vector<LabelEntry>& relevant, std::size_t k) {
  auto relevance_of = [&](std::size_t record) {
    auto it = std::lower_bound(relevant.begin(), relevant.end(), record,
                               [](const LabelEntry& e, std::size_t r) { return e.record < r; });
    return it != relevant.end() && it->record == record ? it->relevance : 0.0;
  };

  QueryMetrics m;
  std::size_t hits = 0;
  double dcg = 0.0;
  for (std::size_t rank = 1; rank <= ranked.size(); ++rank) {
    const double rel = relevance_of(ranked[rank - 1]);
    if (rel > 0.0) {
      ++hits;
      dcg += rel * discount(rank);
      if (rank == 1) m.recall_1 = 1.0 / static_cast<double>(relevant.size());
    }
  }
  m.recall_k = static_cast<double>(hits) /
               static_cast<double>(std::min(k, relevant.size()));

  std::vector<double> ideal;
  ideal.reserve(relevant.size());
  for (const auto& e : relevant) ideal.push_back(e.relevance);
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t rank = 1; rank <= std::min(k, ideal.size()); ++rank) {
    idcg += ideal[rank - 1] * discount(rank);
  }
  m.ndcg_k = dcg / idcg;
  return m;
}

}  // namespace

std::vector<std::vector<std::size_t>> top_k(const EmbeddingMatrix& queries,
                                            const EmbeddingMatrix& data, std::size_t k) {
  detail::require_same_dim(queries, "queries", data, "data");
  check_k(k, data.rows());
  std::vector<std::vector<std::size_t>> out(queries.rows());
  parallel_for(queries.rows(), [&](std::size_t i) {
    std::vector<double> scores(data.rows());
    score_row(queries.row(i), data, scores);
    out[i] = ranked_prefix(scores, k);
  });
  return out;
}

MetricReport metrics(const EmbeddingMatrix& queries, const LabelSet& labels,
                     const EmbeddingMatrix& data, std::size_t k) {
  detail::require_same_dim(queries, "queries", data, "data");
  check_k(k, data.rows());
  labels.validate(queries.rows(), data.rows());
  const auto grouped = labels.by_query(queries.rows());
  const auto ranked = top_k(queries, data, k);

  std::vector<QueryMetrics> per_query(queries.rows());
  parallel_for(queries.rows(),
               [&](std::size_t i) { per_query[i] = score_query(ranked[i], grouped[i], k); });

  MetricReport report;
  report.k = k;
  report.query_count = queries.rows();
  for (const auto& m : per_query) {
    report.recall_at_k += m.recall_k;
    report.ndcg_at_k += m.ndcg_k;
    report.recall_at_1 += m.recall_1;
  }
  const double nq = static_cast<double>(queries.rows());
  report.recall_at_k /= nq;
  report.ndcg_at_k /= nq;
  report.recall_at_1 /= nq;
  return report;
}

}  // namespace nudge
