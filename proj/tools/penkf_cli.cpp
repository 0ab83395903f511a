#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "penkf/errors.hpp"
#include "penkf/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

std::string read_text(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw penkf::IoError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << file.rdbuf();
  return buf.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw penkf::IoError("cannot open '" + path + "' for writing");
  file << text;
  if (!file) throw penkf::IoError("failed writing '" + path + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Possibilistic ensemble Kalman filter experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> repeats;
  int threads = 1;
  auto* run = app.add_subcommand("run", "Run a filtering experiment and write a CSV");
  run->add_option("--config", config_path, "JSON experiment config")->required();
  run->add_option("--out", out_path, "Output CSV path")->required();
  run->add_option("--seed", seed, "Master seed (overrides the config)");
  run->add_option("--repeats", repeats, "Number of repeats (overrides the config)");
  run->add_option("--threads", threads, "Worker threads, 0 = auto")->check(CLI::NonNegativeNumber);

  int vr_n = 8;
  std::vector<int> vr_sizes{8, 16, 64, 128};
  int vr_trials = 200;
  std::uint64_t vr_seed = 0;
  std::string vr_out;
  std::string vr_timing;
  auto* vr = app.add_subcommand("variance-recovery", "Covariance recovery study");
  vr->add_option("--n", vr_n, "State dimension");
  vr->add_option("--sizes", vr_sizes, "Sample sizes N")->delimiter(',');
  vr->add_option("--trials", vr_trials, "Trials per sample size");
  vr->add_option("--seed", vr_seed, "Master seed");
  vr->add_option("--out", vr_out, "Output CSV path")->required();
  vr->add_option("--timing-out", vr_timing, "Optional CSV of wall-clock fit times");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("--config", validate_path, "JSON experiment config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) {
      auto cfg = penkf::parse_config(read_text(config_path));
      if (seed) cfg.master_seed = *seed;
      if (repeats) cfg.repeats = *repeats;
      penkf::validate_config(cfg);
      const auto result = penkf::run_experiment(cfg, threads);
      penkf::write_experiment(cfg, result, out_path);
    } else if (*vr) {
      std::vector<penkf::VarianceRecoveryRow> rows;
      try {
        rows = penkf::run_variance_recovery(vr_n, vr_sizes, vr_trials, vr_seed);
      } catch (const penkf::InvalidArgument& e) {
        throw penkf::ConfigError(e.what());
      }
      write_text(vr_out, penkf::variance_rows_to_csv(rows));
      if (!vr_timing.empty()) write_text(vr_timing, penkf::variance_timing_to_csv(rows));
    } else if (*validate) {
      const auto cfg = penkf::parse_config(read_text(validate_path));
      penkf::validate_config(cfg);
      std::cout << penkf::resolved_config_json(cfg);
    }
  } catch (const penkf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const penkf::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}
