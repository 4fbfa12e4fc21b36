#include "energon/sparse_attention.hpp"

#include <algorithm>
#include <cmath>

namespace energon {

std::vector<double> sparse_attend_row(std::span<const double> q,
                                      const QuantizedMatrix& kq,
                                      const QuantizedMatrix& vq,
                                      const KeyIndexSet& idx,
                                      SoftmaxKind softmax_kind) {
  const int d = static_cast<int>(q.size());
  if (kq.cols != d) {
    throw std::invalid_argument("query and key feature dimensions differ");
  }
  if (kq.rows != vq.rows) {
    throw std::invalid_argument("K and V row counts differ");
  }
  idx.validate(kq.rows);

  // Gather the selected rows at full precision. The score arithmetic matches
  // the dense path exactly, so a full selection reproduces dense attention
  // bit for bit.
  const double k_unit = kq.scale;
  const double v_unit = vq.scale;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  std::vector<double> krow(static_cast<size_t>(d));
  std::vector<double> scores(idx.indices.size());
  for (size_t s = 0; s < idx.indices.size(); ++s) {
    const int j = idx.indices[s];
    for (int t = 0; t < d; ++t) {
      krow[static_cast<size_t>(t)] = kq.at(j, t) * k_unit;
    }
    scores[s] = scaled_dot(q, krow, inv_sqrt_d);
  }

  const std::vector<double> prob = softmax(scores, softmax_kind);

  std::vector<double> out(static_cast<size_t>(vq.cols), 0.0);
  for (int c = 0; c < vq.cols; ++c) {
    double acc = 0.0;
    for (size_t s = 0; s < idx.indices.size(); ++s) {
      acc += prob[s] * (vq.at(idx.indices[s], c) * v_unit);
    }
    out[static_cast<size_t>(c)] = acc;
  }
  return out;
}

HeadResult attend_head(const Matrix& q_head, const Matrix& k_head,
                       const Matrix& v_head, const FilterConfig& cfg,
                       SoftmaxKind softmax_kind, bool compute_coverage) {
  cfg.validate();
  if (q_head.cols() != k_head.cols() || k_head.rows() != v_head.rows()) {
    throw std::invalid_argument("inconsistent head shapes");
  }
  const int n_q = q_head.rows();
  const int n_k = k_head.rows();
  const int d = q_head.cols();

  const QuantizedMatrix qq = quantize_int16(q_head);
  const QuantizedMatrix kq = quantize_int16(k_head);
  const QuantizedMatrix vq = quantize_int16(v_head);

  HeadResult result;
  result.output = Matrix(n_q, v_head.cols());
  result.selections.reserve(static_cast<size_t>(n_q));

  std::vector<bool> touched(static_cast<size_t>(n_k), false);
  double coverage_sum = 0.0;
  uint64_t kept = 0;

  // Float scores for the top-k oracle only; selection itself never sees them.
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  std::vector<double> qrow(static_cast<size_t>(d));
  for (int i = 0; i < n_q; ++i) {
    const KeyIndexSet sel = select(i, qq, kq, cfg);
    kept += static_cast<uint64_t>(sel.size());
    for (int j : sel.indices) touched[static_cast<size_t>(j)] = true;

    for (int t = 0; t < d; ++t) {
      qrow[static_cast<size_t>(t)] = qq.at(i, t) * qq.scale;
    }
    const std::vector<double> out_row =
        sparse_attend_row(qrow, kq, vq, sel, softmax_kind);
    for (int c = 0; c < result.output.cols(); ++c) {
      result.output(i, c) = out_row[static_cast<size_t>(c)];
    }

    if (compute_coverage) {
      std::vector<double> fscores(static_cast<size_t>(n_k));
      for (int j = 0; j < n_k; ++j) {
        fscores[static_cast<size_t>(j)] =
            scaled_dot(q_head.row(i), k_head.row(j), inv_sqrt_d);
      }
      const KeyIndexSet ref = topk_select(fscores, sel.size());
      coverage_sum += coverage(sel, ref);
    }
    result.selections.push_back(sel);
  }

  int touched_count = 0;
  for (bool t : touched) touched_count += t ? 1 : 0;

  result.stats.per_head_pruning_ratio = {
      static_cast<double>(n_k) * n_q / static_cast<double>(kept)};
  result.stats.keys_touched_fraction =
      static_cast<double>(touched_count) / static_cast<double>(n_k);
  if (compute_coverage) {
    result.stats.mean_coverage = coverage_sum / n_q;
  }
  return result;
}

AttentionResult energon_attention(const Matrix& q, const Matrix& k,
                                  const Matrix& v, int heads,
                                  const FilterConfig& cfg,
                                  const PrunePolicy& policy,
                                  SoftmaxKind softmax_kind,
                                  bool compute_coverage) {
  const HeadSet head_set = split_heads(q, k, v, heads);

  AttentionResult result;
  result.output = Matrix(head_set.n, head_set.d_h * heads);
  result.selections.resize(static_cast<size_t>(heads));

  double touched_sum = 0.0;
  double coverage_sum = 0.0;
  int coverage_heads = 0;

  for (int h = 0; h < heads; ++h) {
    const Head& head = head_set.heads[h];
    Matrix part;
    if (policy.enabled(h)) {
      HeadResult hr = attend_head(head.q, head.k, head.v, cfg, softmax_kind,
                                  compute_coverage);
      part = std::move(hr.output);
      result.stats.per_head_pruning_ratio.push_back(
          hr.stats.per_head_pruning_ratio[0]);
      touched_sum += hr.stats.keys_touched_fraction;
      if (hr.stats.mean_coverage) {
        coverage_sum += *hr.stats.mean_coverage;
        ++coverage_heads;
      }
      result.selections[static_cast<size_t>(h)] = std::move(hr.selections);
    } else {
      part = attend_single(head.q, head.k, head.v, softmax_kind);
      result.stats.per_head_pruning_ratio.push_back(1.0);
      touched_sum += 1.0;
    }
    const int base = h * head_set.d_h;
    for (int r = 0; r < head_set.n; ++r) {
      for (int c = 0; c < head_set.d_h; ++c) {
        result.output(r, base + c) = part(r, c);
      }
    }
  }

  result.stats.keys_touched_fraction = touched_sum / heads;
  if (coverage_heads > 0) {
    result.stats.mean_coverage = coverage_sum / coverage_heads;
  }
  return result;
}

}  // namespace energon
