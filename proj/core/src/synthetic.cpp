#include "energon/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace energon {

uint64_t Rng::next() {
  // splitmix64; good enough statistics and trivially portable.
  state_ += 0x9e3779b97f4a7c15ull;
  uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 == 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

int Rng::uniform_int(int lo, int hi) {
  if (lo > hi) throw std::invalid_argument("empty integer range");
  const uint64_t span = static_cast<uint64_t>(hi) - lo + 1;
  return lo + static_cast<int>(next() % span);
}

Matrix gaussian_matrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      m(r, c) = rng.gaussian();
    }
  }
  return m;
}

PlantedWorkload make_planted(const PlantedSpec& spec, uint64_t seed) {
  if (spec.n < 1 || spec.d < 1 || spec.keys_per_query < 1 ||
      spec.keys_per_query > spec.n) {
    throw std::invalid_argument("invalid planted workload spec");
  }
  const int l = spec.l < 0 ? spec.n : spec.l;
  if (l < 1) throw std::invalid_argument("invalid planted query count");

  Rng rng(seed);
  PlantedWorkload w;
  w.k = gaussian_matrix(spec.n, spec.d, rng);
  w.v = gaussian_matrix(spec.n, spec.d, rng);
  w.q = Matrix(l, spec.d);
  w.planted.resize(static_cast<size_t>(l));

  const double mix = spec.strength / spec.keys_per_query;
  std::vector<int> pool(static_cast<size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) pool[static_cast<size_t>(i)] = i;

  for (int i = 0; i < l; ++i) {
    // Partial Fisher-Yates draw of the planted key set.
    for (int t = 0; t < spec.keys_per_query; ++t) {
      const int swap = rng.uniform_int(t, spec.n - 1);
      std::swap(pool[static_cast<size_t>(t)], pool[static_cast<size_t>(swap)]);
    }
    auto& planted = w.planted[static_cast<size_t>(i)];
    planted.assign(pool.begin(), pool.begin() + spec.keys_per_query);
    std::sort(planted.begin(), planted.end());

    for (int c = 0; c < spec.d; ++c) {
      double v = spec.query_noise * rng.gaussian();
      for (int key : planted) v += mix * w.k(key, c);
      w.q(i, c) = v;
    }
  }
  return w;
}

}  // namespace energon
