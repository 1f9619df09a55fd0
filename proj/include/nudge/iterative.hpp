#pragma once

// Step-based variants: repeated normalized-gradient steps of size alpha,
// with the validation count checked every checkpoint_every steps.

#include <cstddef>

#include "nudge/core.hpp"
#include "nudge/report.hpp"

namespace nudge {

struct IterativeConfig {
  double alpha = 0.0;
  std::size_t iters = 0;
  std::size_t checkpoint_every = 1;
  bool normalize_each_step = false;  // false: magnitude variant, true: sphere variant

  /// Throws InvalidArgument naming the offending field.
  void validate() const;
};

/// Delta^(t) = t * alpha * G_i / ||G_i||. Checkpoints at step 0, every
/// checkpoint_every steps and at the final step; the earliest checkpoint
/// with the highest validation count is returned.
FineTuneResult nudge_im(const EmbeddingMatrix& data, const AggregateMatrix& g,
                        const EmbeddingMatrix& val_queries, const LabelSet& val_labels,
                        IterativeConfig config);

/// D_i <- normalize(D_i + alpha * G_i / ||G_i||) each step, checkpointed as
/// above. Unnormalized input is normalized first and flagged in the report.
FineTuneResult nudge_in(const EmbeddingMatrix& data, const AggregateMatrix& g,
                        const EmbeddingMatrix& val_queries, const LabelSet& val_labels,
                        IterativeConfig config);

}  // namespace nudge
