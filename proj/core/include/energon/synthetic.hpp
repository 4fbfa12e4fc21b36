#pragma once

#include <cstdint>
#include <vector>

#include "energon/matrix.hpp"

namespace energon {

// Deterministic random source for synthetic workloads. Gaussian samples come
// from a hand-rolled Box-Muller transform so that generated tensors are
// reproducible across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  uint64_t next();
  double uniform();                 // [0, 1)
  double gaussian();                // N(0, 1)
  int uniform_int(int lo, int hi);  // inclusive bounds

 private:
  uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

Matrix gaussian_matrix(int rows, int cols, Rng& rng);

// Workload with controllable ground truth: K and V are Gaussian; each query
// is query_noise * gaussian + (strength / keys_per_query) * sum of its
// planted key rows, so those keys carry dot products far above background.
struct PlantedSpec {
  int n = 256;
  int d = 64;
  int l = -1;  // query count; -1 means n
  int keys_per_query = 4;
  double query_noise = 0.5;
  double strength = 3.0;
};

struct PlantedWorkload {
  Matrix q, k, v;
  std::vector<std::vector<int>> planted;  // per query, sorted key indices
};

PlantedWorkload make_planted(const PlantedSpec& spec, uint64_t seed);

}  // namespace energon
