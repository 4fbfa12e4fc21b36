#pragma once

#include <cstdint>
#include <vector>

#include "energon/matrix.hpp"

namespace energon {

// Symmetrically quantized tensor: value = data[i] * scale. One scale per
// tensor; data is clamped to +/-32767 so negation always stays in range.
struct QuantizedMatrix {
  int rows = 0;
  int cols = 0;
  double scale = 1.0;
  std::vector<int16_t> data;  // row-major

  int16_t at(int r, int c) const {
    return data[static_cast<size_t>(r) * cols + c];
  }
};

// scale = max|m| / 32767, data = round-half-away-from-zero(m / scale).
// An all-zero input yields scale 1.0 and zero data.
QuantizedMatrix quantize_int16(const Matrix& m);

// Read-only low-bit window into a QuantizedMatrix: element (r, c) is the
// stored 16-bit value arithmetically shifted right by 16 - bits. The 2-bit
// view is therefore exactly the top half of the 4-bit view, which is what
// makes round-0 score reuse exact.
class BitView {
 public:
  BitView(const QuantizedMatrix& src, int bits);

  int at(int r, int c) const {
    return static_cast<int>(src_->at(r, c)) >> shift_;
  }

  int bits() const { return bits_; }
  int rows() const { return src_->rows; }
  int cols() const { return src_->cols; }
  double scale() const { return src_->scale; }
  const QuantizedMatrix& source() const { return *src_; }

 private:
  const QuantizedMatrix* src_;
  int bits_;
  int shift_;
};

// bits must be one of {2, 4, 16}.
BitView view_bits(const QuantizedMatrix& qm, int bits);

struct HiLo {
  int hi;  // signed 2-bit, in [-2, 1]
  int lo;  // unsigned 2-bit, in [0, 3]
};

// Splits a signed 4-bit value so that v4 == hi * 4 + lo exactly.
// Throws if v4 is outside [-8, 7].
HiLo split_hi_lo(int v4);

// Maps view values back to reals: element * scale * 2^(16 - bits).
Matrix dequantize(const BitView& bv);

// Convenience: full-precision reconstruction of a QuantizedMatrix.
Matrix dequantize(const QuantizedMatrix& qm);

}  // namespace energon
