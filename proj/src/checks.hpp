#pragma once

#include <string>

#include "nudge/core.hpp"
#include "nudge/error.hpp"

namespace nudge::detail {

inline void require_same_dim(const EmbeddingMatrix& a, const char* a_name,
                             const EmbeddingMatrix& b, const char* b_name) {
  if (a.dim() != b.dim()) {
    throw InvalidArgument(std::string("dimension mismatch: ") + a_name + " has d=" +
                          std::to_string(a.dim()) + ", " + b_name + " has d=" +
                          std::to_string(b.dim()));
  }
}

inline void require_aggregate_shape(const AggregateMatrix& g, const EmbeddingMatrix& data) {
  if (g.rows() != data.rows() || g.dim() != data.dim()) {
    throw InvalidArgument("aggregate shape " + std::to_string(g.rows()) + "x" +
                          std::to_string(g.dim()) + " does not match data " +
                          std::to_string(data.rows()) + "x" + std::to_string(data.dim()));
  }
}

inline void require_single_label(const LabelSet& labels, std::size_t query_count,
                                 const char* method) {
  if (!labels.is_single_label(query_count)) {
    throw InvalidArgument(std::string(method) +
                          " requires exactly one validation label per query; use the grid "
                          "selector for multi-label validation sets");
  }
}

}  // namespace nudge::detail
