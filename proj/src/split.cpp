#include "nudge/split.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "nudge/error.hpp"

namespace nudge {

namespace {

constexpr double kFractionSlack = 1e-9;

std::size_t floor_share(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + kFractionSlack));
}

// Uniform integer in [0, bound) by rejection, for bound >= 1.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

}  // namespace

std::vector<std::size_t> split_sizes(std::size_t n, const std::vector<double>& fractions) {
  if (fractions.empty()) throw InvalidArgument("at least one fraction is required");
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0) || !std::isfinite(f)) {
      throw InvalidArgument("fractions must be positive, got " + std::to_string(f));
    }
    sum += f;
  }
  if (sum > 1.0 + kFractionSlack) {
    throw InvalidArgument("fractions sum to " + std::to_string(sum) + ", more than 1");
  }
  const std::size_t total = std::min(n, floor_share(sum, n));
  std::vector<std::size_t> sizes(fractions.size());
  std::size_t assigned = 0;
  for (std::size_t k = 0; k + 1 < fractions.size(); ++k) {
    sizes[k] = floor_share(fractions[k], n);
    assigned += sizes[k];
  }
  if (assigned > total) throw InvalidArgument("fractions exceed the number of queries");
  sizes.back() = total - assigned;
  return sizes;
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(bounded(rng, i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

std::vector<QueryPartition> split(const EmbeddingMatrix& queries, const LabelSet& labels,
                                  const std::vector<double>& fractions, std::uint64_t seed) {
  const std::size_t n = queries.rows();
  const auto sizes = split_sizes(n, fractions);
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    if (sizes[k] == 0) {
      throw InvalidArgument("partition " + std::to_string(k) + " would be empty with " +
                            std::to_string(n) + " queries");
    }
  }
  const auto order = seeded_permutation(n, seed);
  const auto grouped = labels.by_query(n);

  std::vector<QueryPartition> parts;
  std::size_t offset = 0;
  for (std::size_t size : sizes) {
    QueryPartition part;
    part.source.assign(order.begin() + static_cast<std::ptrdiff_t>(offset),
                       order.begin() + static_cast<std::ptrdiff_t>(offset + size));
    offset += size;
    std::vector<double> values;
    values.reserve(size * queries.dim());
    std::vector<LabelEntry> entries;
    for (std::size_t row = 0; row < size; ++row) {
      const std::size_t q = part.source[row];
      const auto src = queries.row(q);
      values.insert(values.end(), src.begin(), src.end());
      for (LabelEntry e : grouped[q]) {
        e.query = row;
        entries.push_back(e);
      }
    }
    part.queries = EmbeddingMatrix(size, queries.dim(), std::move(values));
    part.labels = LabelSet(std::move(entries));
    parts.push_back(std::move(part));
  }
  return parts;
}

}  // namespace nudge
