#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "energon/quantize.hpp"

namespace energon {

// Multi-round filtering schedule. Round r scores the surviving candidates
// with the first bitwidths[r] bits of K (the query side always uses its
// 4-bit view, matching the filtering hardware) and keeps the scores above
// the alpha-controlled threshold. Zero rounds means no filtering: every key
// survives.
struct FilterConfig {
  std::vector<int> bitwidths;   // one per round, each 2 or 4, nondecreasing
  std::vector<double> alphas;   // one per round, each in (-1, 1)
  bool reuse_round0 = true;     // reuse 2-bit round-0 scores in a 4-bit round 1

  int rounds() const { return static_cast<int>(bitwidths.size()); }
  void validate() const;  // throws std::invalid_argument on a bad config

  // The default two-round (2, 4)-bit schedule.
  static FilterConfig two_round(double alpha0 = 0.0, double alpha1 = 0.0);
  // No filtering at all; select() returns the full key set.
  static FilterConfig none();
};

// Sorted, duplicate-free set of key positions.
struct KeyIndexSet {
  std::vector<int> indices;

  int size() const { return static_cast<int>(indices.size()); }
  bool empty() const { return indices.empty(); }
  void validate(int n) const;  // sorted, unique, within [0, n)

  static KeyIndexSet all(int n);
};

// Integer dot-product scores for the current candidate keys; scores[i]
// belongs to candidates.indices[i].
struct RoundScores {
  std::vector<int64_t> scores;
  KeyIndexSet candidates;
};

// Dynamic threshold over the candidate scores:
//   alpha >= 0:  theta = alpha * max(S) + (1 - alpha) * mean(S)
//   alpha <  0:  theta = -alpha * min(S) + (1 + alpha) * mean(S)
// Always lies in [min(S), max(S)]. Internally alpha is snapped to a 30-bit
// fixed-point grid so that the survivor comparison can be evaluated in exact
// integer arithmetic; the returned double is that same snapped threshold.
double threshold(const RoundScores& scores, double alpha);

struct FilterRound {
  RoundScores scores;     // scores aligned with the input candidate set
  KeyIndexSet survivors;  // candidates whose score strictly exceeds theta
};

// One filtering round for query row `q_row`. `k` selects the round bitwidth
// (2 or 4). When `prev` carries round-0 scores for exactly these candidates
// and `k` is the 4-bit view, the round-1 score is computed as
// (round0 << 2) + dot(q4, k_low2) instead of a full recomputation; the two
// paths are bit-identical. If no score exceeds the threshold the best
// (lowest-index argmax) candidate alone survives.
FilterRound filter_round(const BitView& q, int q_row, const BitView& k,
                         const KeyIndexSet& candidates, double alpha,
                         const RoundScores* prev = nullptr);

// Runs the full multi-round schedule for one query and returns the keys to
// attend to. `round_survivors`, when given, receives the candidate count
// after each round.
KeyIndexSet select(int q_row, const QuantizedMatrix& qq,
                   const QuantizedMatrix& kq, const FilterConfig& cfg,
                   std::vector<int>* round_survivors = nullptr);

// Indices of the k largest scores, ties broken toward the lower index.
// Requires 1 <= k <= scores.size().
KeyIndexSet topk_select(std::span<const double> scores, int k);

// |selected intersect reference| / |reference|. Throws on an empty reference.
double coverage(const KeyIndexSet& selected, const KeyIndexSet& reference);

// n * |selections| / sum(|selection_i|): 8.0 means each row kept n/8 keys
// on average.
double pruning_ratio(const std::vector<KeyIndexSet>& selections, int n);

namespace detail {

// Fixed-point grid for alpha inside the selector. 2^-30 resolution keeps the
// survivor rule exact in 128-bit integer arithmetic and makes it invariant
// under positive-affine score maps.
inline constexpr int kAlphaFracBits = 30;
inline constexpr int64_t kAlphaOne = int64_t{1} << kAlphaFracBits;

int64_t quantize_alpha(double alpha);  // clamped to +/-(kAlphaOne - 1)

// Exact evaluation of "score > theta" given candidate-count, sum and the
// relevant extreme (max for alpha >= 0, min for alpha < 0).
bool score_survives(int64_t score, int64_t count, int64_t sum,
                    int64_t extreme, int64_t alpha_fx);

}  // namespace detail

}  // namespace energon
