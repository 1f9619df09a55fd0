#pragma once

#include <cstddef>
#include <vector>

#include "nudge/core.hpp"

namespace nudge {

struct MetricReport {
  double recall_at_k = 0.0;
  double ndcg_at_k = 0.0;
  double recall_at_1 = 0.0;
  std::size_t k = 0;
  std::size_t query_count = 0;
};

/// Per query, the k highest-scoring record indices; ties go to the lower index.
std::vector<std::vector<std::size_t>> top_k(const EmbeddingMatrix& queries,
                                            const EmbeddingMatrix& data, std::size_t k);

/// Recall@k with denominator min(k, #relevant), NDCG@k with gain = relevance
/// and discount 1/log2(rank + 1), and Recall@1; all averaged over queries.
/// Recall@1 divides by #relevant so it never exceeds Recall@k; on
/// single-label sets it is top-1 accuracy.
MetricReport metrics(const EmbeddingMatrix& queries, const LabelSet& labels,
                     const EmbeddingMatrix& data, std::size_t k);

}  // namespace nudge
