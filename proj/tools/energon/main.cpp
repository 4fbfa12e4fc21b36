#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"
#include "energon/tensor_io.hpp"

using namespace energon::cli;

namespace {

energon::SoftmaxKind softmax_from_string(const std::string& s) {
  if (s == "exact") return energon::SoftmaxKind::exact;
  if (s == "taylor") return energon::SoftmaxKind::taylor;
  throw CLI::ValidationError("--softmax", "must be exact or taylor");
}

energon::DoubleBufferMode buffer_mode_from_string(const std::string& s) {
  if (s == "auto") return energon::DoubleBufferMode::automatic;
  if (s == "on") return energon::DoubleBufferMode::on;
  if (s == "off") return energon::DoubleBufferMode::off;
  throw CLI::ValidationError("--double-buffer", "must be auto, on or off");
}

void add_common(CLI::App* cmd, CommonOptions& opt, std::string& softmax,
                bool with_manifest = true) {
  if (with_manifest) {
    cmd->add_option("--manifest", opt.manifest_path, "Run manifest (JSON)")
        ->required();
  }
  cmd->add_option("--out", opt.out_dir, "Output directory");
  cmd->add_option("--seed", opt.seed, "Override the workload seed");
  cmd->add_option("--softmax", softmax, "Softmax path: exact|taylor");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic sparse attention toolkit: mix-precision multi-round "
               "filtering, sparse attention, and a co-processor cycle model"};
  app.require_subcommand(1);

  CommonOptions attend_opt, sweep_opt, sim_opt;
  std::string attend_softmax, sweep_softmax, sim_odf, sim_buffer;
  AdviseOptions advise_opt;

  CLI::App* attend = app.add_subcommand(
      "attend", "Run sparse attention and report quality stats");
  add_common(attend, attend_opt, attend_softmax);

  CLI::App* sweep = app.add_subcommand(
      "sweep", "Evaluate an alpha grid and emit one CSV row per point");
  add_common(sweep, sweep_opt, sweep_softmax);
  sweep->add_option("--jobs", sweep_opt.jobs, "Parallel sweep workers")
      ->check(CLI::PositiveNumber);

  CLI::App* simulate = app.add_subcommand(
      "simulate", "Run the cycle-level co-processor model");
  simulate->add_option("--manifest", sim_opt.manifest_path, "Run manifest (JSON)")
      ->required();
  simulate->add_option("--hw", sim_opt.hw_override,
                       "Hardware preset name or config JSON path");
  simulate->add_option("--out", sim_opt.out_dir, "Output directory");
  simulate->add_option("--seed", sim_opt.seed, "Override the workload seed");
  simulate->add_option("--odf", sim_odf, "On-demand fetching: on|off");
  simulate->add_option("--double-buffer", sim_buffer,
                       "Double buffering: auto|on|off");

  CLI::App* advise = app.add_subcommand(
      "advise", "Closed-form pipeline estimate and configuration advice");
  advise->add_option("--n", advise_opt.n, "Sequence length")->required();
  advise->add_option("--l", advise_opt.l, "Query count per head")->required();
  advise->add_option("--d", advise_opt.d, "Per-head feature dimension")
      ->required();
  advise->add_option("--bandwidth", advise_opt.bandwidth,
                     "DRAM bandwidth in bytes per cycle")
      ->required();
  advise->add_option("--beta", advise_opt.beta, "Final keep fraction")
      ->required();
  advise->add_option("--gamma", advise_opt.gamma, "Round-0 keep fraction")
      ->required();
  advise->add_option("--m", advise_opt.mac_units, "MAC units")->required();
  advise->add_option("--p", advise_opt.ipu_pes, "IPU processing elements")
      ->required();
  advise->add_option("--out-file", advise_opt.out_file,
                     "Write the JSON here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (!attend_softmax.empty()) {
      attend_opt.softmax = softmax_from_string(attend_softmax);
    }
    if (!sweep_softmax.empty()) {
      sweep_opt.softmax = softmax_from_string(sweep_softmax);
    }
    if (!sim_odf.empty()) {
      if (sim_odf != "on" && sim_odf != "off") {
        throw CLI::ValidationError("--odf", "must be on or off");
      }
      sim_opt.odf = sim_odf == "on";
    }
    if (!sim_buffer.empty()) {
      sim_opt.double_buffer = buffer_mode_from_string(sim_buffer);
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  }

  if (attend->parsed()) return run_guarded(cmd_attend, attend_opt);
  if (sweep->parsed()) return run_guarded(cmd_sweep, sweep_opt);
  if (simulate->parsed()) return run_guarded(cmd_simulate, sim_opt);
  if (advise->parsed()) {
    try {
      return cmd_advise(advise_opt);
    } catch (const std::invalid_argument& e) {
      std::cerr << "validation error: " << e.what() << "\n";
      return kExitValidation;
    } catch (const energon::IoError& e) {
      std::cerr << "i/o error: " << e.what() << "\n";
      return kExitIo;
    }
  }
  return kExitValidation;
}
