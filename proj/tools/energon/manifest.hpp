#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "energon/attention.hpp"
#include "energon/filter.hpp"
#include "energon/sim.hpp"
#include "energon/sparse_attention.hpp"

namespace energon::cli {

// Manifest or config content that fails schema validation. Unknown fields
// are rejected everywhere (fail-closed).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct WorkloadSpec {
  enum class Kind { synthetic, planted, tensors };
  Kind kind = Kind::synthetic;
  int n = 256;
  int l = -1;  // queries per head for simulation; -1 means n
  int d = 64;
  int heads = 1;
  uint64_t seed = 1;
  int planted_keys = 4;
  double planted_strength = 3.0;
  double query_noise = 0.5;
  std::string q_path, k_path, v_path;
};

struct SimSpec {
  enum class Source { ratios, filter };
  Source source = Source::ratios;
  double beta = 0.25;
  double gamma = 0.5;
  bool odf = false;
  DoubleBufferMode double_buffer = DoubleBufferMode::automatic;
};

struct SweepSpec {
  std::vector<double> alpha0{-0.2, -0.1, 0.0, 0.1, 0.2};
  std::vector<double> alpha1{-0.2, -0.1, 0.0, 0.1, 0.2};
};

struct OutputSpec {
  std::string tensor;  // attend output tensor
  std::string stats;   // attend stats JSON
  std::string report;  // simulate report JSON
  std::string csv;     // sweep / simulate CSV
};

struct RunManifest {
  WorkloadSpec workload;
  FilterConfig filter = FilterConfig::two_round();
  PrunePolicy policy;
  SoftmaxKind softmax = SoftmaxKind::exact;
  std::optional<nlohmann::json> hardware;  // preset name or inline object
  SimSpec sim;
  SweepSpec sweep;
  OutputSpec output;
  uint64_t hash = 0;  // FNV-1a of the manifest file bytes
};

RunManifest load_manifest(const std::string& path);

// Accepts a preset name ("energon-edge", "energon-server") or a JSON file
// path; `override_name` (from --hw) wins over the manifest entry.
HardwareConfig resolve_hardware(const std::optional<nlohmann::json>& manifest_hw,
                                const std::string& override_name);

HardwareConfig hardware_from_json(const nlohmann::json& j);
nlohmann::json hardware_to_json(const HardwareConfig& hw);

uint64_t fnv1a64(const std::string& bytes);
std::string hex64(uint64_t value);

}  // namespace energon::cli
