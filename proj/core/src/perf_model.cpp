#include "energon/perf_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace energon {

PipelineEstimate estimate(int n, int l, int d, double bandwidth_bytes_per_cycle,
                          double beta, double gamma, int mac_units,
                          int ipu_pes) {
  if (n <= 0 || l <= 0 || d <= 0 || mac_units <= 0 || ipu_pes <= 0) {
    throw std::invalid_argument("estimate: counts must be positive");
  }
  if (bandwidth_bytes_per_cycle <= 0.0) {
    throw std::invalid_argument("estimate: bandwidth must be positive");
  }
  if (!(beta > 0.0 && beta <= 1.0) || !(gamma > 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("estimate: keep fractions must lie in (0, 1]");
  }

  PipelineEstimate est;
  est.t_load = 4.5 * d * n / bandwidth_bytes_per_cycle;
  est.t_comp = 2.0 * beta * n * l / mac_units;
  est.t_comp_fu = 2.0 * (1.0 + gamma) * n / ipu_pes;
  est.ratio = est.t_load / est.t_comp;
  est.balanced_m_over_p = beta / (1.0 + gamma);
  return est;
}

PipelineAdvice advise(const PipelineEstimate& est) {
  PipelineAdvice advice;
  advice.double_buffer = est.ratio >= kDoubleBufferRatioThreshold;

  // Round p/m = (1+gamma)/beta to the nearest power of two in log space;
  // halfway cases go to the larger filtering parallelism.
  const double p_over_m = 1.0 / est.balanced_m_over_p;
  const long exponent = std::lround(std::log2(p_over_m));
  advice.m_to_p_denominator = 1 << std::clamp(exponent, 0l, 30l);
  return advice;
}

}  // namespace energon
