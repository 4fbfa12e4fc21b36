#include "energon/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "tensor files are little-endian; big-endian hosts need byte swaps");

namespace energon {

namespace {

template <typename T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw IoError("short read in " + path);
  return value;
}

}  // namespace

void write_tensor(const std::string& path, const TensorData& t) {
  uint64_t count = 1;
  for (uint32_t dim : t.dims) count *= dim;
  if (count != t.values.size()) {
    throw FormatError("tensor payload size does not match dims");
  }
  if (t.dims.empty() || t.dims.size() > 255) {
    throw FormatError("tensor rank must be in [1, 255]");
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");

  out.write(kTensorMagic, 4);
  put<uint16_t>(out, kTensorVersion);
  put<uint8_t>(out, kTensorDtypeF32);
  put<uint8_t>(out, static_cast<uint8_t>(t.dims.size()));
  for (uint32_t dim : t.dims) put<uint32_t>(out, dim);
  out.write(reinterpret_cast<const char*>(t.values.data()),
            static_cast<std::streamsize>(t.values.size() * sizeof(float)));
  if (!out) throw IoError("write failed for " + path);
}

TensorData read_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kTensorMagic, 4) != 0) {
    throw FormatError(path + ": bad magic");
  }
  const auto version = get<uint16_t>(in, path);
  if (version != kTensorVersion) {
    throw FormatError(path + ": unsupported version " + std::to_string(version));
  }
  const auto dtype = get<uint8_t>(in, path);
  if (dtype != kTensorDtypeF32) {
    throw FormatError(path + ": unsupported dtype " + std::to_string(dtype));
  }
  const auto ndim = get<uint8_t>(in, path);
  if (ndim == 0) throw FormatError(path + ": zero-rank tensor");

  TensorData t;
  t.dims.resize(ndim);
  uint64_t count = 1;
  for (uint8_t i = 0; i < ndim; ++i) {
    t.dims[i] = get<uint32_t>(in, path);
    count *= t.dims[i];
  }

  t.values.resize(count);
  in.read(reinterpret_cast<char*>(t.values.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (!in) throw IoError("short read in " + path);

  // Trailing garbage means the payload length claim is wrong.
  char extra;
  in.read(&extra, 1);
  if (in.gcount() != 0) throw FormatError(path + ": trailing bytes after payload");
  return t;
}

void write_matrix(const std::string& path, const Matrix& m) {
  TensorData t;
  t.dims = {static_cast<uint32_t>(m.rows()), static_cast<uint32_t>(m.cols())};
  t.values.reserve(m.data().size());
  for (double v : m.data()) t.values.push_back(static_cast<float>(v));
  write_tensor(path, t);
}

Matrix read_matrix(const std::string& path) {
  const TensorData t = read_tensor(path);
  if (t.dims.size() != 2) {
    throw FormatError(path + ": expected a rank-2 tensor");
  }
  std::vector<double> data(t.values.begin(), t.values.end());
  return Matrix(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]),
                std::move(data));
}

}  // namespace energon
