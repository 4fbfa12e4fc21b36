#include "energon/attention.hpp"

#include <algorithm>
#include <cmath>

namespace energon {

namespace {

double row_max(std::span<const double> row) {
  double m = row[0];
  for (double v : row) m = std::max(m, v);
  return m;
}

std::vector<double> normalize_exp(std::vector<double> exps) {
  double sum = 0.0;
  for (double v : exps) sum += v;
  for (double& v : exps) v /= sum;
  return exps;
}

}  // namespace

std::vector<double> softmax_exact(std::span<const double> row) {
  if (row.empty()) {
    throw std::invalid_argument("softmax of an empty row");
  }
  const double m = row_max(row);
  std::vector<double> exps(row.size());
  for (size_t i = 0; i < row.size(); ++i) {
    exps[i] = std::exp(row[i] - m);
  }
  return normalize_exp(std::move(exps));
}

double exp_taylor(double x) {
  // Halve the argument into [-0.5, 0], evaluate the degree-5 polynomial,
  // square back. Halving is exact in binary floating point, and the
  // polynomial remainder on [-0.5, 0] is small enough that the squarings
  // keep the relative error around 1e-4 even for x = -20.
  int doublings = 0;
  double u = x;
  while (u < -0.5) {
    u *= 0.5;
    ++doublings;
  }
  double t = 1.0 + u * (1.0 + u * (1.0 / 2 + u * (1.0 / 6 + u * (1.0 / 24 + u * (1.0 / 120)))));
  for (int i = 0; i < doublings; ++i) t *= t;
  return t;
}

std::vector<double> softmax_taylor(std::span<const double> row) {
  if (row.empty()) {
    throw std::invalid_argument("softmax of an empty row");
  }
  const double m = row_max(row);
  std::vector<double> exps(row.size());
  for (size_t i = 0; i < row.size(); ++i) {
    exps[i] = exp_taylor(row[i] - m);
  }
  return normalize_exp(std::move(exps));
}

std::vector<double> softmax(std::span<const double> row, SoftmaxKind kind) {
  return kind == SoftmaxKind::exact ? softmax_exact(row) : softmax_taylor(row);
}

double scaled_dot(std::span<const double> q, std::span<const double> k,
                  double inv_sqrt_d) {
  double acc = 0.0;
  for (size_t t = 0; t < q.size(); ++t) {
    acc += q[t] * k[t];
  }
  return acc * inv_sqrt_d;
}

Matrix scaled_scores(const Matrix& q_head, const Matrix& k_head) {
  if (q_head.cols() != k_head.cols()) {
    throw std::invalid_argument("Q and K feature dimensions differ");
  }
  const int n_q = q_head.rows();
  const int n_k = k_head.rows();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q_head.cols()));

  Matrix s(n_q, n_k);
  for (int i = 0; i < n_q; ++i) {
    for (int j = 0; j < n_k; ++j) {
      s(i, j) = scaled_dot(q_head.row(i), k_head.row(j), inv_sqrt_d);
    }
  }
  return s;
}

Matrix attend_single(const Matrix& q_head, const Matrix& k_head,
                     const Matrix& v_head, SoftmaxKind kind) {
  if (k_head.rows() != v_head.rows()) {
    throw std::invalid_argument("K and V row counts differ");
  }
  const Matrix s = scaled_scores(q_head, k_head);
  const int n = s.rows();
  const int d_v = v_head.cols();

  Matrix out(n, d_v);
  for (int i = 0; i < n; ++i) {
    const std::vector<double> prob = softmax(s.row(i), kind);
    for (int c = 0; c < d_v; ++c) {
      double acc = 0.0;
      for (int j = 0; j < k_head.rows(); ++j) {
        acc += prob[j] * v_head(j, c);
      }
      out(i, c) = acc;
    }
  }
  return out;
}

Matrix dense_mha(const HeadSet& heads) {
  if (heads.heads.empty()) {
    throw std::invalid_argument("empty head set");
  }
  const int h_count = heads.head_count();
  Matrix out(heads.n, heads.d_h * h_count);
  for (int h = 0; h < h_count; ++h) {
    const Head& head = heads.heads[h];
    const Matrix part = attend_single(head.q, head.k, head.v);
    const int base = h * heads.d_h;
    for (int r = 0; r < heads.n; ++r) {
      for (int c = 0; c < heads.d_h; ++c) {
        out(r, base + c) = part(r, c);
      }
    }
  }
  return out;
}

}  // namespace energon
