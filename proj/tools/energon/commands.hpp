#pragma once

#include <optional>
#include <string>

#include "manifest.hpp"

namespace energon::cli {

// Exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitResource = 3;
inline constexpr int kExitIo = 4;

struct CommonOptions {
  std::string manifest_path;
  std::string hw_override;   // --hw preset name or JSON path
  std::string out_dir = "."; // --out
  std::optional<uint64_t> seed;
  int jobs = 1;
  std::optional<SoftmaxKind> softmax;
  std::optional<bool> odf;
  std::optional<DoubleBufferMode> double_buffer;
};

struct AdviseOptions {
  int n = 0, l = 0, d = 0;
  double bandwidth = 0.0, beta = 0.0, gamma = 0.0;
  int mac_units = 0, ipu_pes = 0;
  std::string out_file;  // optional; stdout otherwise
};

int cmd_attend(const CommonOptions& opt);
int cmd_sweep(const CommonOptions& opt);
int cmd_simulate(const CommonOptions& opt);
int cmd_advise(const AdviseOptions& opt);

// Maps thrown errors onto the exit-code contract.
int run_guarded(int (*cmd)(const CommonOptions&), const CommonOptions& opt);

}  // namespace energon::cli
