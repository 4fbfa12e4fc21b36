#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace energon {

// Dense row-major matrix of 64-bit floats. All reference computations and
// oracles run on this type; quantized storage lives in quantize.hpp.
class Matrix {
 public:
  Matrix() = default;

  Matrix(int rows, int cols) : rows_(rows), cols_(cols) {
    check_shape(rows, cols);
    data_.assign(static_cast<size_t>(rows) * cols, 0.0);
  }

  Matrix(int rows, int cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    check_shape(rows, cols);
    if (data_.size() != static_cast<size_t>(rows) * cols) {
      throw std::invalid_argument("matrix data length does not match shape");
    }
    for (double v : data_) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("matrix contains non-finite value");
      }
    }
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double operator()(int r, int c) const { return data_[index(r, c)]; }
  double& operator()(int r, int c) { return data_[index(r, c)]; }

  std::span<const double> row(int r) const {
    return {data_.data() + index(r, 0), static_cast<size_t>(cols_)};
  }
  std::span<double> row(int r) {
    return {data_.data() + index(r, 0), static_cast<size_t>(cols_)};
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

 private:
  static void check_shape(int rows, int cols) {
    if (rows < 0 || cols < 0) {
      throw std::invalid_argument("negative matrix dimension");
    }
  }

  size_t index(int r, int c) const {
    return static_cast<size_t>(r) * cols_ + c;
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// Q/K/V slices for one attention head.
struct Head {
  Matrix q, k, v;
};

// Per-head column partition of the full Q/K/V matrices. Every head shares
// the same sequence length n and feature width d_h = d / head count.
struct HeadSet {
  std::vector<Head> heads;
  int n = 0;
  int d_h = 0;

  int head_count() const { return static_cast<int>(heads.size()); }
};

// Partitions n x d inputs into H heads of n x (d/H) columns each.
// Throws if shapes disagree or d is not divisible by H.
HeadSet split_heads(const Matrix& q, const Matrix& k, const Matrix& v, int heads);

}  // namespace energon
