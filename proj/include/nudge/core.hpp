#pragma once

// Domain types shared by every fine-tuning method: embedding matrices, label
// sets, the per-record aggregate of training queries, inner-product scoring
// and the "answered correctly" indicator.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace nudge {

/// Dense row-major matrix of embeddings. Values are always held in double
/// precision; the on-disk dtype is tracked by the I/O layer.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  /// Zero-filled rows x dim matrix.
  EmbeddingMatrix(std::size_t rows, std::size_t dim);
  /// Takes ownership of values; validates shape and finiteness.
  EmbeddingMatrix(std::size_t rows, std::size_t dim, std::vector<double> values);

  static EmbeddingMatrix from_rows(
      std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }
  bool empty() const { return rows_ == 0; }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  std::span<double> row(std::size_t i) {
    return {values_.data() + i * dim_, dim_};
  }
  double operator()(std::size_t i, std::size_t k) const {
    return values_[i * dim_ + k];
  }
  double& operator()(std::size_t i, std::size_t k) { return values_[i * dim_ + k]; }

  const std::vector<double>& values() const { return values_; }

  /// True when every row has L2 norm within tol of 1.
  bool is_normalized(double tol = 1e-6) const;

  /// Throws InvalidArgument on a non-finite entry.
  void check_finite() const;

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

/// Returns a copy with every row scaled to unit L2 norm. Zero rows are an
/// error since they have no direction.
EmbeddingMatrix normalize_rows(const EmbeddingMatrix& m);

/// Elementwise a + b; shapes must match.
EmbeddingMatrix add_rows(const EmbeddingMatrix& a, const EmbeddingMatrix& b);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

struct LabelEntry {
  std::size_t query = 0;
  std::size_t record = 0;
  double relevance = 1.0;

  friend bool operator==(const LabelEntry&, const LabelEntry&) = default;
};

/// Ground-truth (query, record, relevance) triples. Construction rejects
/// duplicates and non-positive relevance; bounds and coverage are checked by
/// validate() because they depend on the matrices the labels are used with.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<LabelEntry> entries);
  LabelSet(std::initializer_list<LabelEntry> entries)
      : LabelSet(std::vector<LabelEntry>(entries)) {}

  const std::vector<LabelEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// Index bounds and "every query must be labeled".
  void validate(std::size_t query_count, std::size_t record_count) const;

  /// True when each query in [0, query_count) has exactly one entry.
  bool is_single_label(std::size_t query_count) const;

  /// Ground-truth record per query; requires is_single_label().
  std::vector<std::size_t> single_targets(std::size_t query_count) const;

  /// Entries grouped per query, records ascending.
  std::vector<std::vector<LabelEntry>> by_query(std::size_t query_count) const;

 private:
  std::vector<LabelEntry> entries_;
};

/// Labeled records of one query grouped by relevance, highest tier first.
struct RelevanceTiers {
  std::vector<std::vector<std::size_t>> tiers;
  std::vector<std::size_t> labeled;  // ascending, for membership tests
};

std::vector<RelevanceTiers> build_tiers(const LabelSet& labels,
                                        std::size_t query_count);

/// Strict tier ordering on one query's score row: every record in a higher
/// tier beats every record in a lower tier, and the lowest tier beats every
/// unlabeled record. Ties are failures.
bool ranked_correctly(std::span<const double> scores, const RelevanceTiers& tiers);

/// G: per-record (optionally relevance-weighted) sum of training queries.
class AggregateMatrix {
 public:
  AggregateMatrix() = default;
  explicit AggregateMatrix(EmbeddingMatrix sums);

  std::size_t rows() const { return sums_.rows(); }
  std::size_t dim() const { return sums_.dim(); }
  const EmbeddingMatrix& sums() const { return sums_; }
  std::span<const double> row(std::size_t i) const { return sums_.row(i); }
  double row_norm(std::size_t i) const { return norms_[i]; }
  const std::vector<double>& norms() const { return norms_; }

  /// G_i / ||G_i||, with zero rows left at zero.
  EmbeddingMatrix unit_directions() const;

 private:
  EmbeddingMatrix sums_;
  std::vector<double> norms_;
};

AggregateMatrix compute_aggregates(const EmbeddingMatrix& train_queries,
                                   const LabelSet& labels, std::size_t record_count,
                                   bool weighted);

/// Dense n_Q x n matrix of inner products.
struct ScoreMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * cols, cols};
  }
};

ScoreMatrix score_all(const EmbeddingMatrix& queries, const EmbeddingMatrix& data);

/// Scores one query against every data row into out (size data.rows()).
void score_row(std::span<const double> query, const EmbeddingMatrix& data,
               std::span<double> out);

struct CorrectnessVector {
  std::vector<bool> correct;
  std::size_t count = 0;
};

CorrectnessVector correctness(const EmbeddingMatrix& queries, const LabelSet& labels,
                              const EmbeddingMatrix& data_star);

}  // namespace nudge
