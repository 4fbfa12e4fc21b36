#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "energon/matrix.hpp"

namespace energon {

// EQKV tensor container: little-endian, payload of f32 values.
//
//   offset  size  field
//   0       4     magic "EQKV"
//   4       2     version (u16, currently 1)
//   6       1     dtype (u8, 0 = f32)
//   7       1     ndim (u8)
//   8       4*n   dims (u32 each)
//   ...           payload, product(dims) f32 values, row-major
inline constexpr char kTensorMagic[4] = {'E', 'Q', 'K', 'V'};
inline constexpr uint16_t kTensorVersion = 1;
inline constexpr uint8_t kTensorDtypeF32 = 0;

struct TensorData {
  std::vector<uint32_t> dims;
  std::vector<float> values;
};

// Filesystem-level failure (open/short read/write).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Structurally invalid tensor file (magic, version, dtype, size mismatch).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_tensor(const std::string& path, const TensorData& t);
TensorData read_tensor(const std::string& path);

// 2-D convenience wrappers; values narrow to f32 on write.
void write_matrix(const std::string& path, const Matrix& m);
Matrix read_matrix(const std::string& path);

}  // namespace energon
