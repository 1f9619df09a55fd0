#include "nudge/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "nudge/error.hpp"
#include "nudge/parallel.hpp"

namespace nudge {

namespace {

void check_shape(std::size_t rows, std::size_t dim) {
  if (rows == 0 || dim == 0) {
    throw InvalidArgument("embedding matrix must have at least one row and one column (got " +
                          std::to_string(rows) + "x" + std::to_string(dim) + ")");
  }
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t dim)
    : rows_(rows), dim_(dim) {
  check_shape(rows, dim);
  values_.assign(rows * dim, 0.0);
}

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t dim,
                                 std::vector<double> values)
    : rows_(rows), dim_(dim), values_(std::move(values)) {
  check_shape(rows, dim);
  if (values_.size() != rows * dim) {
    throw InvalidArgument("embedding matrix expects " + std::to_string(rows * dim) +
                          " values, got " + std::to_string(values_.size()));
  }
  check_finite();
}

EmbeddingMatrix EmbeddingMatrix::from_rows(
    std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n = rows.size();
  const std::size_t d = n == 0 ? 0 : rows.begin()->size();
  std::vector<double> values;
  values.reserve(n * d);
  for (const auto& r : rows) {
    if (r.size() != d) throw InvalidArgument("ragged rows in embedding matrix literal");
    values.insert(values.end(), r.begin(), r.end());
  }
  return EmbeddingMatrix(n, d, std::move(values));
}

bool EmbeddingMatrix::is_normalized(double tol) const {
  for (std::size_t i = 0; i < rows_; ++i) {
    if (std::abs(norm(row(i)) - 1.0) > tol) return false;
  }
  return true;
}

void EmbeddingMatrix::check_finite() const {
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k])) {
      throw InvalidArgument("non-finite value at row " + std::to_string(k / dim_) +
                            ", column " + std::to_string(k % dim_));
    }
  }
}

EmbeddingMatrix normalize_rows(const EmbeddingMatrix& m) {
  EmbeddingMatrix out = m;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    const double len = norm(r);
    if (len == 0.0) {
      throw InvalidArgument("cannot normalize zero row " + std::to_string(i));
    }
    for (double& v : r) v /= len;
  }
  return out;
}

EmbeddingMatrix add_rows(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
  if (a.rows() != b.rows() || a.dim() != b.dim()) {
    throw InvalidArgument("shape mismatch in matrix addition");
  }
  EmbeddingMatrix out = a;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto dst = out.row(i);
    auto src = b.row(i);
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

LabelSet::LabelSet(std::vector<LabelEntry> entries) : entries_(std::move(entries)) {
  for (const auto& e : entries_) {
    if (!(e.relevance > 0.0) || !std::isfinite(e.relevance)) {
      throw InvalidArgument("relevance must be positive (query " + std::to_string(e.query) +
                            ", record " + std::to_string(e.record) + ")");
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> keys;
  keys.reserve(entries_.size());
  for (const auto& e : entries_) keys.emplace_back(e.query, e.record);
  std::sort(keys.begin(), keys.end());
  auto dup = std::adjacent_find(keys.begin(), keys.end());
  if (dup != keys.end()) {
    throw InvalidArgument("duplicate label for query " + std::to_string(dup->first) +
                          ", record " + std::to_string(dup->second));
  }
}

void LabelSet::validate(std::size_t query_count, std::size_t record_count) const {
  std::vector<bool> seen(query_count, false);
  for (const auto& e : entries_) {
    if (e.query >= query_count) {
      throw InvalidArgument("label query index " + std::to_string(e.query) +
                            " out of range (queries: " + std::to_string(query_count) + ")");
    }
    if (e.record >= record_count) {
      throw InvalidArgument("label record index " + std::to_string(e.record) +
                            " out of range (records: " + std::to_string(record_count) + ")");
    }
    seen[e.query] = true;
  }
  for (std::size_t q = 0; q < query_count; ++q) {
    if (!seen[q]) {
      throw InvalidArgument("every query must be labeled (query " + std::to_string(q) +
                            " has no label)");
    }
  }
}

bool LabelSet::is_single_label(std::size_t query_count) const {
  std::vector<std::size_t> counts(query_count, 0);
  for (const auto& e : entries_) {
    if (e.query >= query_count) return false;
    ++counts[e.query];
  }
  return std::all_of(counts.begin(), counts.end(), [](std::size_t c) { return c == 1; });
}

std::vector<std::size_t> LabelSet::single_targets(std::size_t query_count) const {
  if (!is_single_label(query_count)) {
    throw InvalidArgument("expected exactly one label per query");
  }
  std::vector<std::size_t> targets(query_count);
  for (const auto& e : entries_) targets[e.query] = e.record;
  return targets;
}

std::vector<std::vector<LabelEntry>> LabelSet::by_query(std::size_t query_count) const {
  std::vector<std::vector<LabelEntry>> grouped(query_count);
  for (const auto& e : entries_) {
    if (e.query < query_count) grouped[e.query].push_back(e);
  }
  for (auto& g : grouped) {
    std::sort(g.begin(), g.end(),
              [](const LabelEntry& a, const LabelEntry& b) { return a.record < b.record; });
  }
  return grouped;
}

std::vector<RelevanceTiers> build_tiers(const LabelSet& labels, std::size_t query_count) {
  auto grouped = labels.by_query(query_count);
  std::vector<RelevanceTiers> out(query_count);
  for (std::size_t q = 0; q < query_count; ++q) {
    auto& entries = grouped[q];
    auto& t = out[q];
    for (const auto& e : entries) t.labeled.push_back(e.record);
    std::stable_sort(entries.begin(), entries.end(),
                     [](const LabelEntry& a, const LabelEntry& b) {
                       return a.relevance > b.relevance;
                     });
    for (std::size_t k = 0; k < entries.size(); ++k) {
      if (k == 0 || entries[k].relevance != entries[k - 1].relevance) t.tiers.emplace_back();
      t.tiers.back().push_back(entries[k].record);
    }
  }
  return out;
}

bool ranked_correctly(std::span<const double> scores, const RelevanceTiers& tiers) {
  if (tiers.tiers.empty()) return false;
  // Consecutive checks suffice: min(tier k) > max(tier k+1) chains by
  // transitivity down to the unlabeled records.
  for (std::size_t k = 0; k + 1 < tiers.tiers.size(); ++k) {
    double lowest = std::numeric_limits<double>::infinity();
    for (std::size_t r : tiers.tiers[k]) lowest = std::min(lowest, scores[r]);
    for (std::size_t r : tiers.tiers[k + 1]) {
      if (!(lowest > scores[r])) return false;
    }
  }
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t r : tiers.tiers.back()) lowest = std::min(lowest, scores[r]);
  const auto& labeled = tiers.labeled;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (!(lowest > scores[j]) && !std::binary_search(labeled.begin(), labeled.end(), j)) {
      return false;
    }
  }
  return true;
}

AggregateMatrix::AggregateMatrix(EmbeddingMatrix sums) : sums_(std::move(sums)) {
  norms_.resize(sums_.rows());
  for (std::size_t i = 0; i < sums_.rows(); ++i) norms_[i] = norm(sums_.row(i));
}

EmbeddingMatrix AggregateMatrix::unit_directions() const {
  EmbeddingMatrix out(rows(), dim());
  for (std::size_t i = 0; i < rows(); ++i) {
    if (norms_[i] == 0.0) continue;
    auto src = row(i);
    auto dst = out.row(i);
    for (std::size_t k = 0; k < dim(); ++k) dst[k] = src[k] / norms_[i];
  }
  return out;
}

AggregateMatrix compute_aggregates(const EmbeddingMatrix& train_queries,
                                   const LabelSet& labels, std::size_t record_count,
                                   bool weighted) {
  if (record_count == 0) throw InvalidArgument("record count must be at least 1");
  labels.validate(train_queries.rows(), record_count);

  // Ascending query order per record makes the sum independent of the order
  // entries were supplied in.
  std::vector<LabelEntry> order = labels.entries();
  std::sort(order.begin(), order.end(), [](const LabelEntry& a, const LabelEntry& b) {
    return a.query != b.query ? a.query < b.query : a.record < b.record;
  });

  EmbeddingMatrix sums(record_count, train_queries.dim());
  for (const auto& e : order) {
    const double w = weighted ? e.relevance : 1.0;
    auto q = train_queries.row(e.query);
    auto g = sums.row(e.record);
    for (std::size_t k = 0; k < q.size(); ++k) g[k] += w * q[k];
  }
  return AggregateMatrix(std::move(sums));
}

void score_row(std::span<const double> query, const EmbeddingMatrix& data,
               std::span<double> out) {
  for (std::size_t j = 0; j < data.rows(); ++j) out[j] = dot(query, data.row(j));
}

ScoreMatrix score_all(const EmbeddingMatrix& queries, const EmbeddingMatrix& data) {
  if (queries.dim() != data.dim()) {
    throw InvalidArgument("dimension mismatch: queries have d=" + std::to_string(queries.dim()) +
                          ", data has d=" + std::to_string(data.dim()));
  }
  ScoreMatrix s{queries.rows(), data.rows(), {}};
  s.values.resize(s.rows * s.cols);
  parallel_for(queries.rows(), [&](std::size_t i) {
    score_row(queries.row(i), data, {s.values.data() + i * s.cols, s.cols});
  });
  return s;
}

CorrectnessVector correctness(const EmbeddingMatrix& queries, const LabelSet& labels,
                              const EmbeddingMatrix& data_star) {
  if (queries.dim() != data_star.dim()) {
    throw InvalidArgument("dimension mismatch: queries have d=" + std::to_string(queries.dim()) +
                          ", data has d=" + std::to_string(data_star.dim()));
  }
  labels.validate(queries.rows(), data_star.rows());
  const auto tiers = build_tiers(labels, queries.rows());

  std::vector<char> flags(queries.rows(), 0);
  parallel_for(queries.rows(), [&](std::size_t i) {
    std::vector<double> scores(data_star.rows());
    score_row(queries.row(i), data_star, scores);
    flags[i] = ranked_correctly(scores, tiers[i]) ? 1 : 0;
  });

  CorrectnessVector out;
  out.correct.resize(flags.size());
  for (std::size_t i = 0; i < flags.size(); ++i) {
    out.correct[i] = flags[i] != 0;
    out.count += flags[i];
  }
  return out;
}

}  // namespace nudge
