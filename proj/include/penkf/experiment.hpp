#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "penkf/filters.hpp"
#include "penkf/maxdet_fit.hpp"
#include "penkf/models.hpp"

namespace penkf {

enum class ModelKind { kLinear, kLR96 };

/// Fully resolved experiment description. Parsed from a JSON document; see
/// README.md for the schema and defaults.
struct ExperimentConfig {
  ModelKind model = ModelKind::kLinear;
  LinearModelConfig linear;
  LR96Config lr96;
  std::vector<std::string> algorithms{"kf", "sqrtenkf", "penkf"};
  int ensemble_n = 0;  ///< N; 0 means 2n
  InitScheme init_scheme = InitScheme::kRandomPrior;
  SparsityPattern localisation = SparsityPattern::full();
  int steps = 100;
  int repeats = 1;
  std::uint64_t master_seed = 0;
  std::vector<std::string> metrics;  ///< empty means every applicable metric
  UKFConfig ukf;
  SolverOptions solver;

  int state_dim() const { return model == ModelKind::kLinear ? linear.n : lr96.n; }
  int resolved_ensemble_n() const { return ensemble_n > 0 ? ensemble_n : 2 * state_dim(); }
};

/// Parses a JSON config document. Throws ConfigError on malformed input or
/// unknown fields; does not run semantic validation.
ExperimentConfig parse_config(std::string_view json_text);

/// Semantic checks (dimensions, algorithm/model compatibility, ensemble size).
/// Throws ConfigError.
void validate_config(const ExperimentConfig& cfg);

/// Metric identifiers that will be recorded for this config.
std::vector<std::string> resolved_metrics(const ExperimentConfig& cfg);

/// JSON dump of the resolved config (the sidecar file contents).
std::string resolved_config_json(const ExperimentConfig& cfg);

StateSpaceModel build_model(const ExperimentConfig& cfg);

struct ResultRow {
  int repeat = 0;
  int step = 0;
  std::string algorithm;
  std::string metric;
  double value = 0.0;
  bool diverged = false;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;  ///< sorted by (repeat, step, algorithm, metric)
  double worst_feasibility_margin = 0.0;  ///< over every p-EnKF fit performed
};

/// Runs every repeat; repeats are distributed over `threads` workers
/// (0 = hardware concurrency). Output does not depend on the thread count.
ExperimentResult run_experiment(const ExperimentConfig& cfg, int threads = 1);

/// CSV with header `repeat,step,algorithm,metric,value,diverged`.
std::string rows_to_csv(const std::vector<ResultRow>& rows);

/// Writes `path` (CSV) and `path + ".json"` (resolved config). Throws IoError.
void write_experiment(const ExperimentConfig& cfg, const ExperimentResult& result,
                      const std::string& path);

struct VarianceRecoveryRow {
  int n = 0;
  int sample_size = 0;
  int trial = 0;
  std::string method;  ///< "probabilistic" or "possibilistic"
  double rmse = 0.0;
  double seconds = 0.0;
};

/// For each trial draws Σ ~ IW(n², n I); for each N draws N points from N(0, Σ),
/// weights them by N̄(·; 0, Σ), and records the elementwise RMSE against Σ of
/// the known-mean sample covariance and of the max-det fit.
std::vector<VarianceRecoveryRow> run_variance_recovery(int n, const std::vector<int>& sample_sizes,
                                                       int trials, std::uint64_t master_seed,
                                                       const SolverOptions& options = {});

/// CSV with header `n,N,trial,method,rmse`. Deterministic given the seed.
std::string variance_rows_to_csv(const std::vector<VarianceRecoveryRow>& rows);
/// CSV with header `n,N,trial,method,seconds` (wall-clock solve times).
std::string variance_timing_to_csv(const std::vector<VarianceRecoveryRow>& rows);

std::string format_double(double value);

}  // namespace penkf
