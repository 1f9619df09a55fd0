#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "nudge/core.hpp"

namespace nudge {

struct QueryPartition {
  std::vector<std::size_t> source;  // original query index of each row
  EmbeddingMatrix queries;
  LabelSet labels;  // re-indexed to rows of `queries`
};

/// Partition sizes for n queries: floor(f_k * n) for every partition but the
/// last, which takes floor(sum(f) * n) minus the others.
std::vector<std::size_t> split_sizes(std::size_t n, const std::vector<double>& fractions);

/// Seeded shuffle of query indices cut into consecutive partitions; each
/// query's labels follow it. Fractions must be positive and sum to at most 1,
/// and every partition must end up nonempty.
std::vector<QueryPartition> split(const EmbeddingMatrix& queries, const LabelSet& labels,
                                  const std::vector<double>& fractions, std::uint64_t seed);

/// Fisher-Yates permutation of 0..n-1 driven by mt19937_64, with unbiased
/// bounded draws so the result does not depend on the standard library.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

}  // namespace nudge
