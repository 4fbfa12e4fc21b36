#include "energon/filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace energon {

void FilterConfig::validate() const {
  if (alphas.size() != bitwidths.size()) {
    throw std::invalid_argument("filter config: one alpha per round required");
  }
  for (size_t r = 0; r < bitwidths.size(); ++r) {
    if (bitwidths[r] != 2 && bitwidths[r] != 4) {
      throw std::invalid_argument("filter round bitwidth must be 2 or 4");
    }
    if (r > 0 && bitwidths[r] < bitwidths[r - 1]) {
      throw std::invalid_argument("filter round bitwidths must be nondecreasing");
    }
    if (!(alphas[r] > -1.0 && alphas[r] < 1.0)) {
      throw std::invalid_argument("filter alpha must lie in (-1, 1)");
    }
  }
}

FilterConfig FilterConfig::two_round(double alpha0, double alpha1) {
  FilterConfig cfg;
  cfg.bitwidths = {2, 4};
  cfg.alphas = {alpha0, alpha1};
  cfg.reuse_round0 = true;
  return cfg;
}

FilterConfig FilterConfig::none() {
  return FilterConfig{{}, {}, false};
}

void KeyIndexSet::validate(int n) const {
  if (indices.empty()) {
    throw std::invalid_argument("key index set must not be empty");
  }
  int prev = -1;
  for (int i : indices) {
    if (i <= prev || i < 0 || i >= n) {
      throw std::invalid_argument("key indices must be strictly increasing in [0, n)");
    }
    prev = i;
  }
}

KeyIndexSet KeyIndexSet::all(int n) {
  KeyIndexSet s;
  s.indices.resize(n);
  std::iota(s.indices.begin(), s.indices.end(), 0);
  return s;
}

namespace detail {

int64_t quantize_alpha(double alpha) {
  const double scaled = alpha * static_cast<double>(kAlphaOne);
  int64_t fx = std::llround(scaled);
  return std::clamp(fx, -(kAlphaOne - 1), kAlphaOne - 1);
}

bool score_survives(int64_t score, int64_t count, int64_t sum, int64_t extreme,
                    int64_t alpha_fx) {
  // score > alpha * extreme + (1 - |sign|...) -- both branches reduce to
  //   count*score - sum > |alpha| * (count*extreme - sum)
  // after multiplying through by count, which stays exact in 128-bit
  // integers and is invariant under score -> a*score + b for a > 0.
  const __int128 lhs = (static_cast<__int128>(count) * score - sum)
                       << kAlphaFracBits;
  const __int128 rhs = static_cast<__int128>(std::llabs(alpha_fx)) *
                       (static_cast<__int128>(count) * extreme - sum);
  return lhs > rhs;
}

}  // namespace detail

namespace {

struct ScoreStats {
  int64_t min = std::numeric_limits<int64_t>::max();
  int64_t max = std::numeric_limits<int64_t>::min();
  int64_t sum = 0;
  int64_t count = 0;
};

ScoreStats summarize(const std::vector<int64_t>& scores) {
  ScoreStats st;
  for (int64_t s : scores) {
    st.min = std::min(st.min, s);
    st.max = std::max(st.max, s);
    st.sum += s;
  }
  st.count = static_cast<int64_t>(scores.size());
  return st;
}

}  // namespace

double threshold(const RoundScores& scores, double alpha) {
  if (scores.scores.empty()) {
    throw std::invalid_argument("threshold over an empty score set");
  }
  if (!(alpha > -1.0 && alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie in (-1, 1)");
  }
  const ScoreStats st = summarize(scores.scores);
  const int64_t fx = detail::quantize_alpha(alpha);
  const double a = static_cast<double>(std::llabs(fx)) /
                   static_cast<double>(detail::kAlphaOne);
  const double mean =
      static_cast<double>(st.sum) / static_cast<double>(st.count);
  const double extreme =
      fx >= 0 ? static_cast<double>(st.max) : static_cast<double>(st.min);
  const double theta = mean + a * (extreme - mean);
  // The exact value is a convex combination; the clamp only removes
  // floating-point dust at the interval ends.
  return std::clamp(theta, static_cast<double>(st.min),
                    static_cast<double>(st.max));
}

namespace {

// Query rows are always read through the 4-bit view; the round bitwidth
// applies to K only.
std::vector<int> query_row_4bit(const BitView& q, int q_row) {
  const BitView q4 = view_bits(q.source(), 4);
  std::vector<int> vals(static_cast<size_t>(q4.cols()));
  for (int t = 0; t < q4.cols(); ++t) {
    vals[static_cast<size_t>(t)] = q4.at(q_row, t);
  }
  return vals;
}

int64_t dot_view(const std::vector<int>& qvals, const BitView& k, int row) {
  int64_t acc = 0;
  for (int t = 0; t < k.cols(); ++t) {
    acc += static_cast<int64_t>(qvals[static_cast<size_t>(t)]) * k.at(row, t);
  }
  return acc;
}

// Low two bits of the 4-bit view, taken unsigned.
int64_t dot_low2(const std::vector<int>& qvals, const BitView& k4, int row) {
  int64_t acc = 0;
  for (int t = 0; t < k4.cols(); ++t) {
    acc += static_cast<int64_t>(qvals[static_cast<size_t>(t)]) *
           (k4.at(row, t) & 3);
  }
  return acc;
}

}  // namespace

FilterRound filter_round(const BitView& q, int q_row, const BitView& k,
                         const KeyIndexSet& candidates, double alpha,
                         const RoundScores* prev) {
  if (candidates.empty()) {
    throw std::invalid_argument("filter round requires candidates");
  }
  if (!(alpha > -1.0 && alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie in (-1, 1)");
  }
  const bool reuse = prev != nullptr;
  if (reuse) {
    if (k.bits() != 4) {
      throw std::invalid_argument("score reuse requires the 4-bit K view");
    }
    if (prev->candidates.indices != candidates.indices) {
      throw std::invalid_argument("previous scores misaligned with candidates");
    }
  }

  const std::vector<int> qvals = query_row_4bit(q, q_row);

  FilterRound out;
  out.scores.candidates = candidates;
  out.scores.scores.resize(candidates.indices.size());
  for (size_t i = 0; i < candidates.indices.size(); ++i) {
    const int j = candidates.indices[i];
    if (reuse) {
      // k4 = 4*k2 + low2, so q.k4 == (q.k2 << 2) + q.low2 exactly.
      out.scores.scores[i] = (prev->scores[i] << 2) + dot_low2(qvals, k, j);
    } else {
      out.scores.scores[i] = dot_view(qvals, k, j);
    }
  }

  const ScoreStats st = summarize(out.scores.scores);
  const int64_t fx = detail::quantize_alpha(alpha);
  const int64_t extreme = fx >= 0 ? st.max : st.min;

  for (size_t i = 0; i < out.scores.scores.size(); ++i) {
    if (detail::score_survives(out.scores.scores[i], st.count, st.sum, extreme,
                               fx)) {
      out.survivors.indices.push_back(candidates.indices[i]);
    }
  }
  if (out.survivors.empty()) {
    // Nothing strictly exceeded theta (constant scores, or theta == max).
    // Keep the best candidate; ties go to the lowest index.
    size_t best = 0;
    for (size_t i = 1; i < out.scores.scores.size(); ++i) {
      if (out.scores.scores[i] > out.scores.scores[best]) best = i;
    }
    out.survivors.indices.push_back(candidates.indices[best]);
  }
  return out;
}

KeyIndexSet select(int q_row, const QuantizedMatrix& qq,
                   const QuantizedMatrix& kq, const FilterConfig& cfg,
                   std::vector<int>* round_survivors) {
  cfg.validate();
  if (qq.cols != kq.cols) {
    throw std::invalid_argument("query and key feature dimensions differ");
  }
  if (round_survivors) round_survivors->clear();

  const BitView q4 = view_bits(qq, 4);
  KeyIndexSet candidates = KeyIndexSet::all(kq.rows);
  RoundScores carried;
  bool have_carried = false;

  for (int r = 0; r < cfg.rounds(); ++r) {
    const BitView k = view_bits(kq, cfg.bitwidths[r]);
    const bool reuse = cfg.reuse_round0 && r == 1 && cfg.bitwidths[0] == 2 &&
                       cfg.bitwidths[1] == 4 && have_carried;
    const FilterRound round = filter_round(q4, q_row, k, candidates,
                                           cfg.alphas[r],
                                           reuse ? &carried : nullptr);

    // Keep the survivors' scores aligned for a possible reuse next round.
    carried.candidates = round.survivors;
    carried.scores.clear();
    size_t si = 0;
    for (size_t i = 0; i < round.scores.candidates.indices.size(); ++i) {
      if (si < round.survivors.indices.size() &&
          round.scores.candidates.indices[i] == round.survivors.indices[si]) {
        carried.scores.push_back(round.scores.scores[i]);
        ++si;
      }
    }
    have_carried = true;
    candidates = round.survivors;
    if (round_survivors) round_survivors->push_back(candidates.size());
  }
  return candidates;
}

KeyIndexSet topk_select(std::span<const double> scores, int k) {
  const int n = static_cast<int>(scores.size());
  if (k < 1 || k > n) {
    throw std::invalid_argument("top-k size out of range");
  }
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](int a, int b) {
                      if (scores[static_cast<size_t>(a)] != scores[static_cast<size_t>(b)]) {
                        return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
                      }
                      return a < b;  // ties toward the lower index
                    });
  KeyIndexSet out;
  out.indices.assign(order.begin(), order.begin() + k);
  std::sort(out.indices.begin(), out.indices.end());
  return out;
}

double coverage(const KeyIndexSet& selected, const KeyIndexSet& reference) {
  if (reference.empty()) {
    throw std::invalid_argument("coverage against an empty reference");
  }
  size_t hits = 0;
  size_t si = 0;
  for (int r : reference.indices) {
    while (si < selected.indices.size() && selected.indices[si] < r) ++si;
    if (si < selected.indices.size() && selected.indices[si] == r) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(reference.size());
}

double pruning_ratio(const std::vector<KeyIndexSet>& selections, int n) {
  if (selections.empty()) {
    throw std::invalid_argument("pruning ratio of an empty selection list");
  }
  uint64_t kept = 0;
  for (const KeyIndexSet& s : selections) {
    kept += static_cast<uint64_t>(s.size());
  }
  return static_cast<double>(n) * static_cast<double>(selections.size()) /
         static_cast<double>(kept);
}

}  // namespace energon
