#include "energon/quantize.hpp"

#include <algorithm>
#include <cmath>

namespace energon {

namespace {
constexpr int kQMax = 32767;
}

QuantizedMatrix quantize_int16(const Matrix& m) {
  QuantizedMatrix out;
  out.rows = m.rows();
  out.cols = m.cols();
  out.data.resize(m.data().size());

  double max_abs = 0.0;
  for (double v : m.data()) max_abs = std::max(max_abs, std::fabs(v));
  if (max_abs == 0.0) {
    out.scale = 1.0;  // degenerate all-zero input
    return out;
  }

  out.scale = max_abs / kQMax;
  const double inv = 1.0 / out.scale;
  for (size_t i = 0; i < out.data.size(); ++i) {
    // llround rounds halfway cases away from zero; the clamp only guards
    // floating-point dust since |v| <= max_abs.
    long long q = std::llround(m.data()[i] * inv);
    q = std::clamp(q, static_cast<long long>(-kQMax),
                   static_cast<long long>(kQMax));
    out.data[i] = static_cast<int16_t>(q);
  }
  return out;
}

BitView::BitView(const QuantizedMatrix& src, int bits)
    : src_(&src), bits_(bits), shift_(16 - bits) {
  if (bits != 2 && bits != 4 && bits != 16) {
    throw std::invalid_argument("unsupported bit view width");
  }
}

BitView view_bits(const QuantizedMatrix& qm, int bits) {
  return BitView(qm, bits);
}

HiLo split_hi_lo(int v4) {
  if (v4 < -8 || v4 > 7) {
    throw std::invalid_argument("value outside signed 4-bit range");
  }
  return HiLo{v4 >> 2, v4 & 3};
}

Matrix dequantize(const BitView& bv) {
  const double unit = bv.scale() * std::ldexp(1.0, 16 - bv.bits());
  Matrix out(bv.rows(), bv.cols());
  for (int r = 0; r < bv.rows(); ++r) {
    for (int c = 0; c < bv.cols(); ++c) {
      out(r, c) = bv.at(r, c) * unit;
    }
  }
  return out;
}

Matrix dequantize(const QuantizedMatrix& qm) {
  return dequantize(BitView(qm, 16));
}

}  // namespace energon
