#include "energon/matrix.hpp"

namespace energon {

HeadSet split_heads(const Matrix& q, const Matrix& k, const Matrix& v,
                    int heads) {
  if (heads < 1) {
    throw std::invalid_argument("head count must be at least 1");
  }
  const int n = q.rows();
  const int d = q.cols();
  if (k.rows() != n || k.cols() != d || v.rows() != n || v.cols() != d) {
    throw std::invalid_argument("Q, K, V must share the same n x d shape");
  }
  if (d % heads != 0) {
    throw std::invalid_argument("feature dimension not divisible by head count");
  }

  const int d_h = d / heads;
  HeadSet out;
  out.n = n;
  out.d_h = d_h;
  out.heads.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    Head head{Matrix(n, d_h), Matrix(n, d_h), Matrix(n, d_h)};
    const int base = h * d_h;
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < d_h; ++c) {
        head.q(r, c) = q(r, base + c);
        head.k(r, c) = k(r, base + c);
        head.v(r, c) = v(r, base + c);
      }
    }
    out.heads.push_back(std::move(head));
  }
  return out;
}

}  // namespace energon
