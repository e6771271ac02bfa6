#include "dotlab/io.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kPresets = fs::path(DOTLAB_DATA_DIR) / "presets";

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "dotlab_harness_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args, const fs::path& out) {
  const std::string cmd = std::string("\"") + DOTLAB_CLI_PATH + "\" " + args + " --out \"" + out.string() + "\" > \"" +
                          (out / "stdout.txt").string() + "\" 2> \"" + (out / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

int run_preset(const std::string& command, const std::string& preset, const fs::path& out, const std::string& extra = "") {
  return run_cli(command + " --config \"" + (kPresets / preset).string() + "\" " + extra, out);
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const auto file = dir / "config.json";
  std::ofstream(file) << text;
  return file;
}

json read_json(const fs::path& file) { return json::parse(dotlab::io::read_text(file)); }

std::vector<std::vector<std::string>> csv_rows(const fs::path& file) { return dotlab::io::read_csv(file); }

}  // namespace

TEST(Cli, FunnelPresetWritesArtifactsAndManifest) {
  const auto out = scratch("funnel");
  ASSERT_EQ(run_preset("funnel", "fig2a.json", out), 0);
  const auto man = read_json(out / "manifest.json");
  EXPECT_EQ(man["command"], "funnel");
  for (const auto& a : man["artifacts"]) {
    const auto text = dotlab::io::read_text(out / a["file"].get<std::string>());
    EXPECT_EQ(dotlab::io::sha256_hex(text), a["sha256"]) << a["file"];
    EXPECT_EQ(text.size(), a["bytes"].get<std::size_t>());
  }
  EXPECT_TRUE(fs::exists(out / "funnel_map.csv"));
  EXPECT_TRUE(fs::exists(out / "funnel.svg"));
}

TEST(Cli, UnknownKeyIsConfigError) {
  const auto out = scratch("unknown_key");
  const auto cfg = write_config(out, R"({"schema": 1, "command": "hubbard", "hubbard": {"t12": 1, "t23": 1, "bogus": 3}})");
  EXPECT_EQ(run_cli("hubbard --config \"" + cfg.string() + "\"", out), 2);
  const auto err = read_json(out / "error.json");
  EXPECT_EQ(err["error"]["kind"], "ConfigError");
  EXPECT_NE(err["error"]["message"].get<std::string>().find("bogus"), std::string::npos);
}

TEST(Cli, MalformedJsonIsConfigError) {
  const auto out = scratch("malformed");
  const auto cfg = write_config(out, R"({"schema": 1, "command": "hubbard", )");
  EXPECT_EQ(run_cli("hubbard --config \"" + cfg.string() + "\"", out), 2);
  EXPECT_EQ(read_json(out / "error.json")["error"]["kind"], "ConfigError");
}

TEST(Cli, CommandMismatchAndMissingArgumentsAreConfigErrors) {
  const auto out = scratch("mismatch");
  EXPECT_EQ(run_preset("hubbard", "fig2a.json", out), 2);
  EXPECT_EQ(run_cli("hubbard", out), 2);
  EXPECT_EQ(run_cli("no-such-command --config x.json", out), 2);
  EXPECT_EQ(run_cli("hubbard --config \"" + (out / "missing.json").string() + "\"", out), 2);
}

TEST(Cli, InvalidGeometryIsConfigError) {
  const auto out = scratch("geometry");
  const auto cfg = write_config(out, R"({"schema": 1, "command": "potential",
    "device": {"array": {"n_gates": 2, "voltages": [0.05, 0.05], "d": 0.0}}})");
  EXPECT_EQ(run_cli("potential --config \"" + cfg.string() + "\"", out), 2);
  EXPECT_EQ(read_json(out / "error.json")["error"]["kind"], "NonPositiveDimension");
}

TEST(Cli, RuntimeFailureExitsOne) {
  // Data on one side of the anticrossing only: the fit cannot separate t0 from alpha.
  const auto out = scratch("degenerate");
  const auto cfg = write_config(out, R"({"schema": 1, "command": "fit-funnel", "seed": 3,
    "data": {"truth": {"t0": 900.0, "alpha": 500.0, "v_ac": 0.0, "s": 19.0, "f0": 39140.0, "delta_ez": 40.0},
             "v_range": [-1.0, -0.5], "n_points": 100, "sigma_f": 0.05},
    "init": {"t0": 900.0, "alpha": 500.0, "v_ac": 0.0, "s": 19.0, "f0": 39140.0}})");
  EXPECT_EQ(run_cli("fit-funnel --config \"" + cfg.string() + "\"", out), 1);
  EXPECT_EQ(read_json(out / "error.json")["error"]["kind"], "DegenerateJacobian");
}

TEST(Cli, FitFunnelIsDeterministic) {
  const auto a = scratch("det_a"), b = scratch("det_b");
  ASSERT_EQ(run_preset("fit-funnel", "fit_fig2a.json", a), 0);
  ASSERT_EQ(run_preset("fit-funnel", "fit_fig2a.json", b), 0);
  for (const char* f : {"dataset.csv", "fit.csv", "fit_report.json", "manifest.json"})
    EXPECT_EQ(dotlab::io::read_text(a / f), dotlab::io::read_text(b / f)) << f;
  const auto rep = read_json(a / "fit_report.json");
  EXPECT_NEAR(rep["params"]["t0"].get<double>(), 900.0, 18.0);
  EXPECT_NEAR(rep["params"]["s"].get<double>(), 19.0, 0.38);
}

TEST(Cli, SeedOverrideChangesSyntheticData) {
  const auto a = scratch("seed_a"), b = scratch("seed_b");
  ASSERT_EQ(run_preset("fit-funnel", "fit_fig2a.json", a), 0);
  ASSERT_EQ(run_preset("fit-funnel", "fit_fig2a.json", b, "--seed 8"), 0);
  EXPECT_NE(dotlab::io::read_text(a / "dataset.csv"), dotlab::io::read_text(b / "dataset.csv"));
  EXPECT_EQ(read_json(b / "manifest.json")["seed"], 8);
}

TEST(Cli, RamseyPresetRecoversDephasingTime) {
  const auto out = scratch("ramsey");
  ASSERT_EQ(run_preset("fit-ramsey", "ramsey_q1_synth.json", out), 0);
  const auto rep = read_json(out / "ramsey_report.json");
  EXPECT_NEAR(rep["params"]["t2"].get<double>(), 120.0, 6.0);
  EXPECT_TRUE(rep["warnings"].empty());
  const auto bundled = scratch("ramsey_file");
  ASSERT_EQ(run_preset("fit-ramsey", "ramsey_q1.json", bundled), 0);
}

TEST(Cli, SweepErrorRowIsAWarning) {
  const auto out = scratch("sweep_error");
  const auto cfg = write_config(out, R"({"schema": 1, "command": "exchange-sweep",
    "device": {"array": {"n_gates": 2, "voltages": [0.05, 0.05]}},
    "sweep": {"parameter": "d", "values": [40.0, 20.0], "mode": "t0"}})");
  ASSERT_EQ(run_cli("exchange-sweep --config \"" + cfg.string() + "\"", out), 0);
  EXPECT_EQ(read_json(out / "manifest.json")["warning_count"], 1);
  const auto rows = csv_rows(out / "t0_sweep.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].back(), "error");
  EXPECT_EQ(rows[1].back(), "ok");
}

TEST(Cli, ThreadCountDoesNotChangeOutput) {
  const auto a = scratch("threads_a"), b = scratch("threads_b");
  const auto cfg = write_config(a, R"({"schema": 1, "command": "exchange-sweep",
    "device": {"array": {"n_gates": 2, "voltages": [0.05, 0.05]}},
    "sweep": {"parameter": "t_SiO2", "values": [4.0, 6.0, 8.0], "mode": "t0"}})");
  ASSERT_EQ(run_cli("exchange-sweep --threads 1 --config \"" + cfg.string() + "\"", a), 0);
  ASSERT_EQ(run_cli("exchange-sweep --threads 3 --config \"" + cfg.string() + "\"", b), 0);
  EXPECT_EQ(dotlab::io::read_text(a / "t0_sweep.csv"), dotlab::io::read_text(b / "t0_sweep.csv"));
  EXPECT_EQ(dotlab::io::read_text(a / "manifest.json"), dotlab::io::read_text(b / "manifest.json"));
}

TEST(Cli, DecoupledThirdSiteGivesZeroJ13) {
  const auto out = scratch("t23_zero");
  ASSERT_EQ(run_preset("hubbard", "hubbard_t23_zero.json", out), 0);
  const auto rows = csv_rows(out / "couplings.csv");
  ASSERT_GE(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.back(), "ok") << r[0];
    EXPECT_NEAR(std::stod(r[3]), 0.0, 1e-9) << r[0];
    EXPECT_NEAR(std::stod(r[2]), 0.0, 1e-9) << r[0];
  }
}

TEST(Cli, RegimeViolationStillReportsExactDiagonalization) {
  const auto out = scratch("regime");
  ASSERT_EQ(run_preset("hubbard", "hubbard_regime_violation.json", out), 0);
  const auto rows = csv_rows(out / "couplings.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0][0], "ed");
  EXPECT_EQ(rows[0].back(), "ok");
  EXPECT_GT(std::stod(rows[0][1]), 0.0);
  EXPECT_EQ(rows[2][0], "pt4");
  EXPECT_EQ(rows[2].back(), "RegimeViolation");
  EXPECT_GE(read_json(out / "manifest.json")["warning_count"].get<int>(), 1);
}

TEST(Cli, PotentialPresetRuns) {
  const auto out = scratch("potential");
  ASSERT_EQ(run_preset("potential", "potential_reference.json", out), 0);
  const auto dots = csv_rows(out / "dots.csv");
  ASSERT_FALSE(dots.empty());
  for (const auto& d : dots) EXPECT_LT(std::stod(d[3]), 0.0) << d[0];
}
