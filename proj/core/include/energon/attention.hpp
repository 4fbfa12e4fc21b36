#pragma once

#include <span>
#include <vector>

#include "energon/matrix.hpp"

namespace energon {

enum class SoftmaxKind { exact, taylor };

// Numerically stable softmax: subtracts the row max before exponentiation.
// Output is nonnegative and sums to 1 within 1e-9. Throws on an empty row.
std::vector<double> softmax_exact(std::span<const double> row);

// Softmax built on a polynomial exponential: each max-subtracted argument x
// is halved until it lies in [-0.5, 0], a degree-5 Taylor polynomial
// approximates exp there, and the result is squared back up. Deviates from
// softmax_exact by less than 1e-3 elementwise for arguments in [-20, 0].
std::vector<double> softmax_taylor(std::span<const double> row);

std::vector<double> softmax(std::span<const double> row, SoftmaxKind kind);

// The polynomial exponential behind softmax_taylor, exposed for tests.
double exp_taylor(double x);

// Inner product of q and k scaled by `inv_sqrt_d`. Both the dense and the
// sparse attention paths score rows through this helper so that their
// results are bit-identical on identical inputs.
double scaled_dot(std::span<const double> q, std::span<const double> k,
                  double inv_sqrt_d);

// S = Q_h * K_h^T / sqrt(d_h), shape n x n.
Matrix scaled_scores(const Matrix& q_head, const Matrix& k_head);

// Single-head attention: softmax(scaled_scores(Q,K)) * V.
Matrix attend_single(const Matrix& q_head, const Matrix& k_head,
                     const Matrix& v_head,
                     SoftmaxKind kind = SoftmaxKind::exact);

// Full multi-head attention over a HeadSet; head h occupies output columns
// [h*d_h, (h+1)*d_h). Uses the exact softmax.
Matrix dense_mha(const HeadSet& heads);

}  // namespace energon
