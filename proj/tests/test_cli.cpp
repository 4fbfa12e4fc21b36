#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "commands.hpp"
#include "energon/synthetic.hpp"
#include "energon/tensor_io.hpp"
#include "manifest.hpp"

using namespace energon;
using namespace energon::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("energon_cli_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::string write_json(const TempDir& dir, const std::string& name, const json& j) {
  const std::string path = dir.file(name);
  std::ofstream out(path);
  out << j.dump(2);
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json manifest_base(int n, int d, int heads, uint64_t seed) {
  return json{
      {"version", 1},
      {"workload",
       {{"kind", "synthetic"}, {"n", n}, {"d", d}, {"heads", heads}, {"seed", seed}}},
  };
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ENERGON_CLI_PATH) + " " + args +
                          " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::vector<std::vector<std::string>> read_csv_rows(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

TEST_CASE("manifest validation is fail-closed") {
  TempDir tmp;

  SUBCASE("unknown top-level field") {
    json j = manifest_base(16, 8, 1, 1);
    j["surprise"] = true;
    CHECK_THROWS_AS(load_manifest(write_json(tmp, "m.json", j)), ValidationError);
  }

  SUBCASE("unknown nested field") {
    json j = manifest_base(16, 8, 1, 1);
    j["workload"]["extra"] = 1;
    CHECK_THROWS_AS(load_manifest(write_json(tmp, "m.json", j)), ValidationError);
  }

  SUBCASE("missing version") {
    json j = manifest_base(16, 8, 1, 1);
    j.erase("version");
    CHECK_THROWS_AS(load_manifest(write_json(tmp, "m.json", j)), ValidationError);
  }

  SUBCASE("wrong version") {
    json j = manifest_base(16, 8, 1, 1);
    j["version"] = 2;
    CHECK_THROWS_AS(load_manifest(write_json(tmp, "m.json", j)), ValidationError);
  }

  SUBCASE("bad filter config") {
    json j = manifest_base(16, 8, 1, 1);
    j["filter"] = {{"bitwidths", {2, 3}}, {"alphas", {0.0, 0.0}}};
    CHECK_THROWS_AS(load_manifest(write_json(tmp, "m.json", j)), ValidationError);
  }

  SUBCASE("invalid json") {
    const std::string path = tmp.file("broken.json");
    std::ofstream(path) << "{not json";
    CHECK_THROWS_AS(load_manifest(path), ValidationError);
  }

  SUBCASE("valid manifest parses with defaults") {
    const RunManifest m = load_manifest(write_json(tmp, "m.json", manifest_base(16, 8, 2, 3)));
    CHECK(m.workload.n == 16);
    CHECK(m.workload.heads == 2);
    CHECK(m.filter.bitwidths == std::vector<int>{2, 4});
    CHECK(m.softmax == SoftmaxKind::exact);
    CHECK(m.hash != 0);
  }
}

TEST_CASE("hardware presets and config files agree") {
  const HardwareConfig edge_file =
      hardware_from_json(json::parse(slurp(std::string(ENERGON_CONFIG_DIR) +
                                           "/energon-edge.json")));
  const HardwareConfig edge_builtin = HardwareConfig::energon_edge();
  CHECK(edge_file.dram_bandwidth == edge_builtin.dram_bandwidth);
  CHECK(edge_file.ipu_pes == edge_builtin.ipu_pes);
  CHECK(edge_file.mac_units == edge_builtin.mac_units);
  CHECK(edge_file.probv_multipliers == edge_builtin.probv_multipliers);
  CHECK(edge_file.fu_kbuf_bytes == edge_builtin.fu_kbuf_bytes);
  CHECK(edge_file.au_kvbuf_bytes == edge_builtin.au_kvbuf_bytes);
  CHECK(edge_file.power.core_w == edge_builtin.power.core_w);
  CHECK(edge_file.power.dram_w == edge_builtin.power.dram_w);

  const HardwareConfig server_file =
      hardware_from_json(json::parse(slurp(std::string(ENERGON_CONFIG_DIR) +
                                           "/energon-server.json")));
  const HardwareConfig server_builtin = HardwareConfig::energon_server();
  CHECK(server_file.dram_bandwidth == server_builtin.dram_bandwidth);
  CHECK(server_file.ipu_pes == server_builtin.ipu_pes);
  CHECK(server_file.mac_units == server_builtin.mac_units);
  CHECK(server_file.softmax_units == server_builtin.softmax_units);
  CHECK(server_file.power.interface_w == server_builtin.power.interface_w);

  // Round trip through the serializer.
  const HardwareConfig back = hardware_from_json(hardware_to_json(edge_builtin));
  CHECK(back.dram_bandwidth == edge_builtin.dram_bandwidth);
  CHECK(back.selector_parallelism == edge_builtin.selector_parallelism);
}

TEST_CASE("hardware config rejects unknown fields and names") {
  json j = hardware_to_json(HardwareConfig::energon_edge());
  j["bonus"] = 1;
  CHECK_THROWS_AS(hardware_from_json(j), ValidationError);
  CHECK_THROWS_AS(resolve_hardware(json("energon-mobile"), ""), ValidationError);
  CHECK_THROWS_AS(resolve_hardware(std::nullopt, ""), ValidationError);
}

TEST_CASE("attend reports zero deviation when pruning is disabled") {
  TempDir tmp;
  json j = manifest_base(32, 16, 2, 5);
  j["policy"] = {{"prune", false}};
  CommonOptions opt;
  opt.manifest_path = write_json(tmp, "m.json", j);
  opt.out_dir = tmp.file("out");
  REQUIRE(cmd_attend(opt) == kExitOk);

  const json stats = json::parse(slurp(tmp.file("out/attend_stats.json")));
  CHECK(stats["deviation_from_dense"]["max_abs"] == 0.0);
  CHECK(stats["deviation_from_dense"]["mean_abs"] == 0.0);
  CHECK(stats["pruning"]["enabled"] == false);
  CHECK(stats["pruning"]["per_head_ratio"][0] == 1.0);
}

TEST_CASE("attend output is deterministic across invocations") {
  TempDir tmp;
  const json j = manifest_base(64, 32, 4, 42);
  CommonOptions opt;
  opt.manifest_path = write_json(tmp, "m.json", j);

  opt.out_dir = tmp.file("a");
  REQUIRE(cmd_attend(opt) == kExitOk);
  opt.out_dir = tmp.file("b");
  REQUIRE(cmd_attend(opt) == kExitOk);

  CHECK(slurp(tmp.file("a/attend_stats.json")) == slurp(tmp.file("b/attend_stats.json")));
  CHECK(slurp(tmp.file("a/attend_out.eqkv")) == slurp(tmp.file("b/attend_out.eqkv")));
}

TEST_CASE("sweep default grid emits 25 deterministic rows") {
  TempDir tmp;
  json j = manifest_base(96, 64, 1, 9);
  j["workload"]["kind"] = "planted";
  CommonOptions opt;
  opt.manifest_path = write_json(tmp, "m.json", j);
  opt.jobs = 4;

  opt.out_dir = tmp.file("a");
  REQUIRE(cmd_sweep(opt) == kExitOk);
  opt.out_dir = tmp.file("b");
  opt.jobs = 1;
  REQUIRE(cmd_sweep(opt) == kExitOk);

  CHECK(slurp(tmp.file("a/sweep.csv")) == slurp(tmp.file("b/sweep.csv")));

  const auto rows = read_csv_rows(tmp.file("a/sweep.csv"));
  REQUIRE(rows.size() == 26);  // header + 25 grid points
  CHECK(rows[0][0] == "alpha0");

  // With alpha0 fixed, a larger alpha1 can only prune more.
  for (size_t r = 2; r < rows.size(); ++r) {
    if (rows[r][0] == rows[r - 1][0]) {
      CHECK(std::stod(rows[r][2]) >= std::stod(rows[r - 1][2]) - 1e-12);
    }
  }
}

TEST_CASE("a single-point grid emits one row") {
  TempDir tmp;
  json j = manifest_base(48, 32, 1, 4);
  j["sweep"] = {{"alpha0", {0.0}}, {"alpha1", {0.0}}};
  CommonOptions opt;
  opt.manifest_path = write_json(tmp, "m.json", j);
  opt.out_dir = tmp.file("out");
  REQUIRE(cmd_sweep(opt) == kExitOk);
  const auto rows = read_csv_rows(tmp.file("out/sweep.csv"));
  REQUIRE(rows.size() == 2);  // header + the mean-filter point
  CHECK(std::stod(rows[1][0]) == 0.0);
  CHECK(std::stod(rows[1][1]) == 0.0);
}

TEST_CASE("tensors workload kind round-trips through attend") {
  TempDir tmp;
  Rng rng(88);
  const Matrix q = gaussian_matrix(24, 16, rng);
  const Matrix k = gaussian_matrix(24, 16, rng);
  const Matrix v = gaussian_matrix(24, 16, rng);
  write_matrix(tmp.file("q.eqkv"), q);
  write_matrix(tmp.file("k.eqkv"), k);
  write_matrix(tmp.file("v.eqkv"), v);

  json j{{"version", 1},
         {"workload",
          {{"kind", "tensors"},
           {"q", tmp.file("q.eqkv")},
           {"k", tmp.file("k.eqkv")},
           {"v", tmp.file("v.eqkv")},
           {"heads", 2}}},
         {"policy", {{"prune", false}}}};
  CommonOptions opt;
  opt.manifest_path = write_json(tmp, "m.json", j);
  opt.out_dir = tmp.file("out");
  REQUIRE(cmd_attend(opt) == kExitOk);

  // The dense fallback on f32-narrowed inputs must match the library result.
  const Matrix qf = read_matrix(tmp.file("q.eqkv"));
  const Matrix kf = read_matrix(tmp.file("k.eqkv"));
  const Matrix vf = read_matrix(tmp.file("v.eqkv"));
  const Matrix want = dense_mha(split_heads(qf, kf, vf, 2));
  const Matrix got = read_matrix(tmp.file("out/attend_out.eqkv"));
  REQUIRE(got.rows() == want.rows());
  for (int r = 0; r < got.rows(); ++r) {
    for (int c = 0; c < got.cols(); ++c) {
      CHECK(got(r, c) == static_cast<double>(static_cast<float>(want(r, c))));
    }
  }

  const json stats = json::parse(slurp(tmp.file("out/attend_stats.json")));
  CHECK(stats["workload"]["kind"] == "tensors");
  CHECK(stats["workload"]["n"] == 24);
}

TEST_CASE("a sweep-chosen alpha pair near 4x lands in the target band") {
  TempDir tmp;
  json j = manifest_base(256, 64, 4, 77);
  CommonOptions opt;
  opt.manifest_path = write_json(tmp, "m.json", j);
  opt.out_dir = tmp.file("sweep");
  REQUIRE(cmd_sweep(opt) == kExitOk);

  const auto rows = read_csv_rows(tmp.file("sweep/sweep.csv"));
  double best_a0 = 0, best_a1 = 0, best_dist = 1e300;
  for (size_t r = 1; r < rows.size(); ++r) {
    const double ratio = std::stod(rows[r][2]);
    if (std::fabs(ratio - 4.0) < best_dist) {
      best_dist = std::fabs(ratio - 4.0);
      best_a0 = std::stod(rows[r][0]);
      best_a1 = std::stod(rows[r][1]);
    }
  }

  json attend = manifest_base(256, 64, 4, 77);
  attend["filter"] = {{"bitwidths", {2, 4}}, {"alphas", {best_a0, best_a1}}};
  CommonOptions attend_opt;
  attend_opt.manifest_path = write_json(tmp, "attend.json", attend);
  attend_opt.out_dir = tmp.file("attend");
  REQUIRE(cmd_attend(attend_opt) == kExitOk);

  const json stats = json::parse(slurp(tmp.file("attend/attend_stats.json")));
  const double ratio = stats["pruning"]["mean_ratio"].get<double>();
  CHECK(ratio >= 3.5);
  CHECK(ratio <= 4.5);
}

TEST_CASE("simulate reports high model agreement on the server preset") {
  TempDir tmp;
  json j = manifest_base(512, 64, 1, 3);
  j["workload"]["l"] = 512;
  j["hardware"] = "energon-server";
  j["sim"] = {{"source", "ratios"}, {"beta", 0.25}, {"gamma", 0.5}};
  CommonOptions opt;
  opt.manifest_path = write_json(tmp, "m.json", j);
  opt.out_dir = tmp.file("out");
  REQUIRE(cmd_simulate(opt) == kExitOk);

  const json report = json::parse(slurp(tmp.file("out/simulate_report.json")));
  CHECK(report["agreement_pct"].get<double>() >= 90.0);
  CHECK(report["perf_model"]["ratio"].get<double>() ==
        doctest::Approx(0.03515625));
}

TEST_CASE("simulate on the edge preset reproduces the load formula") {
  TempDir tmp;
  json j = manifest_base(512, 64, 1, 3);
  j["workload"]["l"] = 512;
  j["hardware"] = "energon-edge";
  j["sim"] = {{"source", "ratios"}, {"beta", 0.25}, {"gamma", 0.5}};
  CommonOptions opt;
  opt.manifest_path = write_json(tmp, "m.json", j);
  opt.out_dir = tmp.file("out");
  REQUIRE(cmd_simulate(opt) == kExitOk);

  const auto rows = read_csv_rows(tmp.file("out/simulate_report.csv"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[1][1] == "5760");  // ceil(4.5 * 64 * 512 / 25.6)
}

TEST_CASE("paired odf and prefetch runs obey byte dominance") {
  TempDir tmp;
  json j = manifest_base(128, 64, 2, 21);
  j["workload"]["d"] = 128;
  j["hardware"] = "energon-edge";
  j["sim"] = {{"source", "filter"}, {"odf", "on"}};
  CommonOptions opt;
  opt.manifest_path = write_json(tmp, "m.json", j);

  opt.out_dir = tmp.file("odf");
  REQUIRE(cmd_simulate(opt) == kExitOk);
  opt.odf = false;
  opt.out_dir = tmp.file("dense");
  REQUIRE(cmd_simulate(opt) == kExitOk);

  const json odf = json::parse(slurp(tmp.file("odf/simulate_report.json")));
  const json dense = json::parse(slurp(tmp.file("dense/simulate_report.json")));
  CHECK(odf["dram"]["bytes_read"].get<uint64_t>() <=
        dense["dram"]["bytes_read"].get<uint64_t>());
  CHECK(odf["dram"]["keys_fetched_fraction"].get<double>() <= 1.0);
}

TEST_CASE("odf with ratio workloads is a validation error") {
  TempDir tmp;
  json j = manifest_base(64, 32, 1, 2);
  j["hardware"] = "energon-edge";
  j["sim"] = {{"source", "ratios"}, {"odf", "on"}};
  CommonOptions opt;
  opt.manifest_path = write_json(tmp, "m.json", j);
  opt.out_dir = tmp.file("out");
  CHECK(run_guarded(cmd_simulate, opt) == kExitValidation);
}

TEST_CASE("cli binary maps errors to exit codes") {
  TempDir tmp;

  SUBCASE("missing manifest file is an i/o error") {
    CHECK(run_cli("attend --manifest " + tmp.file("missing.json")) == kExitIo);
  }

  SUBCASE("schema violation") {
    json j = manifest_base(16, 8, 1, 1);
    j["bogus"] = 1;
    const std::string path = write_json(tmp, "bad.json", j);
    CHECK(run_cli("attend --manifest " + path) == kExitValidation);
  }

  SUBCASE("buffer overflow is a resource violation") {
    json j = manifest_base(1024, 64, 1, 1);
    j["workload"]["l"] = 64;
    j["hardware"] = "energon-edge";
    j["sim"] = {{"source", "ratios"}};
    const std::string path = write_json(tmp, "big.json", j);
    CHECK(run_cli("simulate --manifest " + path + " --out " +
                  tmp.file("out")) == kExitResource);
  }

  SUBCASE("usage error") {
    CHECK(run_cli("attend") == kExitValidation);
    CHECK(run_cli("frobnicate") == kExitValidation);
  }

  SUBCASE("advise prints the reference ratios") {
    const std::string out = tmp.file("advise.json");
    CHECK(run_cli("advise --n 512 --l 512 --d 64 --bandwidth 512 --beta 0.25 "
                  "--gamma 0.5 --m 8 --p 64 --out-file " + out) == kExitOk);
    const json j = json::parse(slurp(out));
    CHECK(std::fabs(j["estimate"]["ratio"].get<double>() - 0.017) < 0.001);
    CHECK(j["advice"]["double_buffer"] == "off");

    CHECK(run_cli("advise --n 512 --l 512 --d 64 --bandwidth 25.6 --beta 0.25 "
                  "--gamma 0.5 --m 8 --p 64 --out-file " + out) == kExitOk);
    const json lpddr = json::parse(slurp(out));
    CHECK(std::fabs(lpddr["estimate"]["ratio"].get<double>() - 0.35) < 0.01);
    CHECK(lpddr["advice"]["double_buffer"] == "off");

    CHECK(run_cli("advise --n 512 --l 128 --d 64 --bandwidth 25.6 --beta 0.25 "
                  "--gamma 0.5 --m 8 --p 64 --out-file " + out) == kExitOk);
    const json lp = json::parse(slurp(out));
    CHECK(lp["estimate"]["ratio"].get<double>() == doctest::Approx(1.40625));
    CHECK(lp["advice"]["double_buffer"] == "on");
    CHECK(lp.contains("note"));
  }
}

TEST_CASE("run_guarded maps io errors") {
  CommonOptions opt;
  opt.manifest_path = "/nonexistent/manifest.json";
  CHECK(run_guarded(cmd_attend, opt) == kExitIo);
}
