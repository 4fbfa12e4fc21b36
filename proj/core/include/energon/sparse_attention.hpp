#pragma once

#include <optional>
#include <span>
#include <vector>

#include "energon/attention.hpp"
#include "energon/filter.hpp"
#include "energon/matrix.hpp"
#include "energon/quantize.hpp"

namespace energon {

struct AttentionStats {
  std::vector<double> per_head_pruning_ratio;   // >= 1.0 each
  std::optional<double> mean_coverage;          // vs equal-size float top-k
  double keys_touched_fraction = 1.0;           // |union of selections| / n,
                                                // averaged over heads
};

// High-precision sparse attention for one query row: softmax over the scaled
// scores of the selected keys only, then the probability-weighted sum of the
// selected value rows. K and V are read through their full 16-bit
// reconstruction; `q` must already be the dequantized query row. The
// quantization scales are applied during reconstruction and the 1/sqrt(d)
// factor during scoring; the two compose multiplicatively and are never
// folded together.
std::vector<double> sparse_attend_row(std::span<const double> q,
                                      const QuantizedMatrix& kq,
                                      const QuantizedMatrix& vq,
                                      const KeyIndexSet& idx,
                                      SoftmaxKind softmax = SoftmaxKind::exact);

struct HeadResult {
  Matrix output;
  AttentionStats stats;
  std::vector<KeyIndexSet> selections;  // one per query row
};

// Quantizes Q/K/V once, runs the filter per query, then attends over the
// survivors. With `compute_coverage` the float-score top-k oracle of equal
// size is evaluated per row and averaged into stats.mean_coverage.
HeadResult attend_head(const Matrix& q_head, const Matrix& k_head,
                       const Matrix& v_head, const FilterConfig& cfg,
                       SoftmaxKind softmax = SoftmaxKind::exact,
                       bool compute_coverage = false);

// Per-head pruning enable flags. An empty list means every head is pruned.
struct PrunePolicy {
  std::vector<bool> head_enabled;

  bool enabled(int head) const {
    if (head_enabled.empty()) return true;
    return head_enabled[static_cast<size_t>(head) % head_enabled.size()];
  }

  static PrunePolicy all(bool enabled) { return PrunePolicy{{enabled}}; }
};

struct AttentionResult {
  Matrix output;
  AttentionStats stats;
  // Selections per head and query; empty inner vector for dense-fallback
  // heads. Feeds the simulator's workload traces.
  std::vector<std::vector<KeyIndexSet>> selections;
};

// Multi-head sparse attention: split_heads, per-head attend_head, concat.
// Heads with pruning disabled fall back to the dense float path and
// contribute a pruning ratio of 1.
AttentionResult energon_attention(const Matrix& q, const Matrix& k,
                                  const Matrix& v, int heads,
                                  const FilterConfig& cfg,
                                  const PrunePolicy& policy = {},
                                  SoftmaxKind softmax = SoftmaxKind::exact,
                                  bool compute_coverage = false);

}  // namespace energon
