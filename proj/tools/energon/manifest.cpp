#include "manifest.hpp"

#include <fstream>
#include <sstream>

#include "energon/tensor_io.hpp"

namespace energon::cli {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw ValidationError(where + ": unknown field '" + key + "'");
    }
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    throw ValidationError(where + ": missing field '" + std::string(key) + "'");
  }
  return *it;
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  return it->get<T>();
}

WorkloadSpec parse_workload(const json& j) {
  reject_unknown(j,
                 {"kind", "n", "l", "d", "heads", "seed", "planted_keys",
                  "planted_strength", "query_noise", "q", "k", "v"},
                 "workload");
  WorkloadSpec w;
  const std::string kind = get_or<std::string>(j, "kind", "synthetic");
  if (kind == "synthetic") {
    w.kind = WorkloadSpec::Kind::synthetic;
  } else if (kind == "planted") {
    w.kind = WorkloadSpec::Kind::planted;
  } else if (kind == "tensors") {
    w.kind = WorkloadSpec::Kind::tensors;
  } else {
    throw ValidationError("workload: kind must be synthetic, planted or tensors");
  }

  if (w.kind == WorkloadSpec::Kind::tensors) {
    w.q_path = require(j, "q", "workload").get<std::string>();
    w.k_path = require(j, "k", "workload").get<std::string>();
    w.v_path = require(j, "v", "workload").get<std::string>();
    w.heads = get_or<int>(j, "heads", 1);
    w.l = get_or<int>(j, "l", -1);
    return w;
  }

  w.n = require(j, "n", "workload").get<int>();
  w.d = require(j, "d", "workload").get<int>();
  w.heads = get_or<int>(j, "heads", 1);
  w.l = get_or<int>(j, "l", -1);
  w.seed = get_or<uint64_t>(j, "seed", 1);
  w.planted_keys = get_or<int>(j, "planted_keys", 4);
  w.planted_strength = get_or<double>(j, "planted_strength", 3.0);
  w.query_noise = get_or<double>(j, "query_noise", 0.5);
  if (w.n < 1 || w.d < 1 || w.heads < 1) {
    throw ValidationError("workload: n, d, heads must be positive");
  }
  if (w.l == 0 || w.l < -1 || w.l > w.n) {
    throw ValidationError("workload: l must lie in [1, n]");
  }
  return w;
}

FilterConfig parse_filter(const json& j) {
  reject_unknown(j, {"bitwidths", "alphas", "reuse_round0"}, "filter");
  FilterConfig cfg;
  cfg.bitwidths = get_or<std::vector<int>>(j, "bitwidths", {2, 4});
  cfg.alphas = get_or<std::vector<double>>(j, "alphas", {0.0, 0.0});
  cfg.reuse_round0 = get_or<bool>(j, "reuse_round0", true);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(std::string("filter: ") + e.what());
  }
  return cfg;
}

PrunePolicy parse_policy(const json& j) {
  reject_unknown(j, {"prune", "per_head"}, "policy");
  PrunePolicy policy;
  if (j.contains("per_head")) {
    policy.head_enabled = j.at("per_head").get<std::vector<bool>>();
    if (policy.head_enabled.empty()) {
      throw ValidationError("policy: per_head must not be empty");
    }
  } else {
    policy = PrunePolicy::all(get_or<bool>(j, "prune", true));
  }
  return policy;
}

SoftmaxKind parse_softmax(const json& j) {
  const std::string kind = j.get<std::string>();
  if (kind == "exact") return SoftmaxKind::exact;
  if (kind == "taylor") return SoftmaxKind::taylor;
  throw ValidationError("softmax must be 'exact' or 'taylor'");
}

DoubleBufferMode parse_buffer_mode(const std::string& mode) {
  if (mode == "auto") return DoubleBufferMode::automatic;
  if (mode == "on") return DoubleBufferMode::on;
  if (mode == "off") return DoubleBufferMode::off;
  throw ValidationError("double_buffer must be auto, on or off");
}

SimSpec parse_sim(const json& j) {
  reject_unknown(j, {"source", "beta", "gamma", "odf", "double_buffer"}, "sim");
  SimSpec sim;
  const std::string source = get_or<std::string>(j, "source", "ratios");
  if (source == "ratios") {
    sim.source = SimSpec::Source::ratios;
  } else if (source == "filter") {
    sim.source = SimSpec::Source::filter;
  } else {
    throw ValidationError("sim: source must be 'ratios' or 'filter'");
  }
  sim.beta = get_or<double>(j, "beta", 0.25);
  sim.gamma = get_or<double>(j, "gamma", 0.5);
  const std::string odf = get_or<std::string>(j, "odf", "off");
  if (odf != "on" && odf != "off") {
    throw ValidationError("sim: odf must be 'on' or 'off'");
  }
  sim.odf = odf == "on";
  sim.double_buffer = parse_buffer_mode(get_or<std::string>(j, "double_buffer", "auto"));
  return sim;
}

SweepSpec parse_sweep(const json& j) {
  reject_unknown(j, {"alpha0", "alpha1"}, "sweep");
  SweepSpec sweep;
  if (j.contains("alpha0")) sweep.alpha0 = j.at("alpha0").get<std::vector<double>>();
  if (j.contains("alpha1")) sweep.alpha1 = j.at("alpha1").get<std::vector<double>>();
  if (sweep.alpha0.empty() || sweep.alpha1.empty()) {
    throw ValidationError("sweep: alpha grids must not be empty");
  }
  return sweep;
}

OutputSpec parse_output(const json& j) {
  reject_unknown(j, {"tensor", "stats", "report", "csv"}, "output");
  OutputSpec out;
  out.tensor = get_or<std::string>(j, "tensor", "");
  out.stats = get_or<std::string>(j, "stats", "");
  out.report = get_or<std::string>(j, "report", "");
  out.csv = get_or<std::string>(j, "csv", "");
  return out;
}

}  // namespace

uint64_t fnv1a64(const std::string& bytes) {
  uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

std::string hex64(uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(value));
  return buf;
}

RunManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string bytes = buffer.str();

  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw ValidationError("manifest " + path + ": " + e.what());
  }

  reject_unknown(j,
                 {"version", "workload", "filter", "policy", "softmax",
                  "hardware", "sim", "sweep", "output"},
                 "manifest");
  const int version = require(j, "version", "manifest").get<int>();
  if (version != 1) {
    throw ValidationError("manifest: unsupported version " + std::to_string(version));
  }

  RunManifest m;
  m.hash = fnv1a64(bytes);
  m.workload = parse_workload(require(j, "workload", "manifest"));
  if (j.contains("filter")) m.filter = parse_filter(j.at("filter"));
  if (j.contains("policy")) m.policy = parse_policy(j.at("policy"));
  if (j.contains("softmax")) m.softmax = parse_softmax(j.at("softmax"));
  if (j.contains("hardware")) m.hardware = j.at("hardware");
  if (j.contains("sim")) m.sim = parse_sim(j.at("sim"));
  if (j.contains("sweep")) m.sweep = parse_sweep(j.at("sweep"));
  if (j.contains("output")) m.output = parse_output(j.at("output"));
  return m;
}

HardwareConfig hardware_from_json(const json& j) {
  reject_unknown(j,
                 {"version", "name", "dram_bandwidth_bytes_per_cycle",
                  "clock_hz", "ipu_pes", "mac_units", "softmax_units",
                  "exp_units_per_softmax", "probv_multipliers",
                  "selector_parallelism", "fu_kbuf_bytes", "au_kvbuf_bytes",
                  "double_buffer", "power"},
                 "hardware");
  const int version = require(j, "version", "hardware").get<int>();
  if (version != 1) {
    throw ValidationError("hardware: unsupported version " + std::to_string(version));
  }

  HardwareConfig hw;
  hw.name = get_or<std::string>(j, "name", "custom");
  hw.dram_bandwidth =
      require(j, "dram_bandwidth_bytes_per_cycle", "hardware").get<double>();
  hw.clock_hz = get_or<double>(j, "clock_hz", 1e9);
  hw.ipu_pes = require(j, "ipu_pes", "hardware").get<int>();
  hw.mac_units = require(j, "mac_units", "hardware").get<int>();
  hw.softmax_units = get_or<int>(j, "softmax_units", 1);
  hw.exp_units_per_softmax = get_or<int>(j, "exp_units_per_softmax", 8);
  hw.probv_multipliers = require(j, "probv_multipliers", "hardware").get<int>();
  hw.selector_parallelism = get_or<int>(j, "selector_parallelism", 64);
  hw.fu_kbuf_bytes = require(j, "fu_kbuf_bytes", "hardware").get<uint64_t>();
  hw.au_kvbuf_bytes = require(j, "au_kvbuf_bytes", "hardware").get<uint64_t>();
  hw.double_buffer =
      parse_buffer_mode(get_or<std::string>(j, "double_buffer", "auto"));

  if (j.contains("power")) {
    const json& p = j.at("power");
    reject_unknown(p, {"core_w", "interface_w", "dram_w", "dram_pj_per_byte"},
                   "hardware.power");
    hw.power.core_w = get_or<double>(p, "core_w", 0.0);
    hw.power.interface_w = get_or<double>(p, "interface_w", 0.0);
    hw.power.dram_w = get_or<double>(p, "dram_w", 0.0);
    hw.power.dram_pj_per_byte = get_or<double>(p, "dram_pj_per_byte", 0.0);
  }

  try {
    hw.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(std::string("hardware: ") + e.what());
  }
  return hw;
}

nlohmann::json hardware_to_json(const HardwareConfig& hw) {
  const char* buffer_mode = hw.double_buffer == DoubleBufferMode::automatic
                                ? "auto"
                                : hw.double_buffer == DoubleBufferMode::on
                                      ? "on"
                                      : "off";
  return json{
      {"version", 1},
      {"name", hw.name},
      {"dram_bandwidth_bytes_per_cycle", hw.dram_bandwidth},
      {"clock_hz", hw.clock_hz},
      {"ipu_pes", hw.ipu_pes},
      {"mac_units", hw.mac_units},
      {"softmax_units", hw.softmax_units},
      {"exp_units_per_softmax", hw.exp_units_per_softmax},
      {"probv_multipliers", hw.probv_multipliers},
      {"selector_parallelism", hw.selector_parallelism},
      {"fu_kbuf_bytes", hw.fu_kbuf_bytes},
      {"au_kvbuf_bytes", hw.au_kvbuf_bytes},
      {"double_buffer", buffer_mode},
      {"power",
       {{"core_w", hw.power.core_w},
        {"interface_w", hw.power.interface_w},
        {"dram_w", hw.power.dram_w},
        {"dram_pj_per_byte", hw.power.dram_pj_per_byte}}},
  };
}

namespace {

std::optional<HardwareConfig> builtin_hardware(const std::string& name) {
  if (name == "energon-edge") return HardwareConfig::energon_edge();
  if (name == "energon-server") return HardwareConfig::energon_server();
  return std::nullopt;
}

HardwareConfig hardware_from_name_or_path(const std::string& value) {
  if (const auto builtin = builtin_hardware(value)) return *builtin;
  std::ifstream in(value, std::ios::binary);
  if (!in) {
    throw ValidationError("unknown hardware preset or unreadable file: " + value);
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("hardware " + value + ": " + e.what());
  }
  return hardware_from_json(j);
}

}  // namespace

HardwareConfig resolve_hardware(const std::optional<nlohmann::json>& manifest_hw,
                                const std::string& override_name) {
  if (!override_name.empty()) {
    return hardware_from_name_or_path(override_name);
  }
  if (!manifest_hw) {
    throw ValidationError("no hardware config given (manifest or --hw)");
  }
  if (manifest_hw->is_string()) {
    return hardware_from_name_or_path(manifest_hw->get<std::string>());
  }
  return hardware_from_json(*manifest_hw);
}

}  // namespace energon::cli
