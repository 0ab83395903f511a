#include "penkf/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "json.hpp"

#include "penkf/errors.hpp"
#include "penkf/metrics.hpp"

namespace penkf {

using json = nlohmann::json;

namespace {

const std::vector<std::string> kAlgorithms{"kf", "stenkf", "sqrtenkf", "ukf", "penkf"};
const std::vector<std::string> kMetrics{"rmse_truth", "rmse_kf_mean", "rmse_kf_cov", "logdet",
                                        "mahalanobis"};

std::string scheme_name(InitScheme s) {
  switch (s) {
    case InitScheme::kRandomPrior:
      return "random_prior";
    case InitScheme::kUkfFull:
      return "ukf_full";
    case InitScheme::kUkfPlus:
      return "ukf_plus";
    case InitScheme::kUkfMinus:
      return "ukf_minus";
  }
  return "random_prior";
}

InitScheme parse_scheme(const std::string& s) {
  if (s == "random_prior") return InitScheme::kRandomPrior;
  if (s == "ukf_full") return InitScheme::kUkfFull;
  if (s == "ukf_plus") return InitScheme::kUkfPlus;
  if (s == "ukf_minus") return InitScheme::kUkfMinus;
  throw ConfigError("unknown init_scheme '" + s + "'");
}

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError("unknown field '" + key + "' in " + where);
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

void read_mean(const json& obj, std::optional<Vector>& out) {
  if (!obj.contains("init_mean")) return;
  const auto values = obj.at("init_mean").get<std::vector<double>>();
  out = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

SparsityPattern parse_pattern(const json& obj) {
  reject_unknown(obj, {"kind", "bandwidth", "zeros"}, "localisation");
  const auto kind = obj.value("kind", std::string("full"));
  if (kind == "full") return SparsityPattern::full();
  if (kind == "banded") {
    if (!obj.contains("bandwidth")) throw ConfigError("banded localisation needs 'bandwidth'");
    const int bw = obj.at("bandwidth").get<int>();
    if (bw < 1) throw ConfigError("bandwidth must be a positive integer");
    return SparsityPattern::banded(bw);
  }
  if (kind == "explicit") {
    std::vector<std::pair<int, int>> zeros;
    for (const auto& pair : obj.value("zeros", json::array())) {
      const auto idx = pair.get<std::vector<int>>();
      if (idx.size() != 2) throw ConfigError("explicit zeros must be index pairs");
      if (idx[0] == idx[1]) throw ConfigError("diagonal entries cannot be forced to zero");
      if (idx[0] < 0 || idx[1] < 0) throw ConfigError("zero-set indices must be non-negative");
      zeros.emplace_back(idx[0], idx[1]);
    }
    return SparsityPattern::explicit_zeros(std::move(zeros));
  }
  throw ConfigError("unknown localisation kind '" + kind + "'");
}

json pattern_json(const SparsityPattern& p) {
  switch (p.kind()) {
    case SparsityPattern::Kind::kFull:
      return {{"kind", "full"}};
    case SparsityPattern::Kind::kBanded:
      return {{"kind", "banded"}, {"bandwidth", p.bandwidth()}};
    case SparsityPattern::Kind::kExplicit: {
      json zeros = json::array();
      for (auto [i, j] : p.zeros()) {
        if (i < j) zeros.push_back({i, j});
      }
      return {{"kind", "explicit"}, {"zeros", zeros}};
    }
  }
  return {};
}

json mean_json(const std::optional<Vector>& mean, int n) {
  const Vector v = mean ? *mean : Vector::Zero(n);
  return std::vector<double>(v.data(), v.data() + v.size());
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

struct Posterior {
  Vector mean;
  Matrix cov;
};

// One filter over one trajectory; step(y) returns the posterior after assimilating y.
using FilterStep = std::function<Posterior(const Vector&)>;

enum class AlgorithmSalt : std::uint64_t { kKf = 0, kStEnKF = 1, kSqrtEnKF = 2, kUkf = 3, kPenkf = 4 };

std::uint64_t salt_for(const std::string& alg) {
  if (alg == "kf") return static_cast<std::uint64_t>(AlgorithmSalt::kKf);
  if (alg == "stenkf") return static_cast<std::uint64_t>(AlgorithmSalt::kStEnKF);
  if (alg == "sqrtenkf") return static_cast<std::uint64_t>(AlgorithmSalt::kSqrtEnKF);
  if (alg == "ukf") return static_cast<std::uint64_t>(AlgorithmSalt::kUkf);
  return static_cast<std::uint64_t>(AlgorithmSalt::kPenkf);
}

struct RepeatOutput {
  std::vector<ResultRow> rows;
  double worst_margin = std::numeric_limits<double>::infinity();
};

FilterStep make_filter(const std::string& alg, const ExperimentConfig& cfg,
                       const StateSpaceModel& model, int repeat, double& worst_margin) {
  const std::uint64_t salt = salt_for(alg);
  const Eigen::Index count = cfg.resolved_ensemble_n();
  if (alg == "kf") {
    auto state = std::make_shared<KalmanState>(KalmanState{model.init_mean, model.init_cov});
    return [state, &model](const Vector& y) {
      *state = kf_update(kf_predict(*state, *model.transition_matrix, model.u), y, model.h, model.v);
      return Posterior{state->mean, state->covariance};
    };
  }
  if (alg == "ukf") {
    auto state = std::make_shared<KalmanState>(KalmanState{model.init_mean, model.init_cov});
    return [state, &model, ukf = cfg.ukf](const Vector& y) {
      *state = ukf_step(*state, model.transition, model.u, y, model.h, model.v, ukf);
      return Posterior{state->mean, state->covariance};
    };
  }
  if (alg == "sqrtenkf" || alg == "stenkf") {
    // Probabilistic baselines use N + 1 members, matching the p-EnKF's particle count.
    Rng init(cfg.master_seed, static_cast<std::uint64_t>(repeat), StreamPurpose::kEnsembleInit, salt);
    const Matrix root = cholesky_lower_psd(model.init_cov);
    Matrix members(model.state_dim(), count + 1);
    for (Eigen::Index i = 0; i <= count; ++i) {
      members.col(i) = init.gaussian_from_factor(model.init_mean, root);
    }
    auto ens = std::make_shared<ProbEnsemble>(ProbEnsemble{std::move(members)});
    auto noise = std::make_shared<Rng>(cfg.master_seed, static_cast<std::uint64_t>(repeat),
                                       StreamPurpose::kEnsembleNoise, salt);
    auto perturb = std::make_shared<Rng>(cfg.master_seed, static_cast<std::uint64_t>(repeat),
                                         StreamPurpose::kObservationPerturbation, salt);
    const bool stochastic = alg == "stenkf";
    return [ens, noise, perturb, stochastic, &model](const Vector& y) {
      auto pred = enkf_predict(*ens, model.transition, model.u, *noise);
      if (stochastic) {
        *ens = stenkf_update(pred.ensemble, pred.mean, pred.covariance, y, model.h, model.v,
                             *perturb);
      } else {
        *ens = sqrt_enkf_update(pred.ensemble, pred.mean, pred.covariance, y, model.h, model.v);
      }
      auto moments = ensemble_moments(*ens);
      return Posterior{std::move(moments.mean), std::move(moments.covariance)};
    };
  }
  // penkf
  Rng init(cfg.master_seed, static_cast<std::uint64_t>(repeat), StreamPurpose::kPenkfInit, salt);
  const auto prior = GaussianPossibility::from_covariance(model.init_mean, model.init_cov);
  auto ens = std::make_shared<WeightedEnsemble>(penkf_init(prior, count, cfg.init_scheme, cfg.ukf, init));
  return [ens, &model, &cfg, &worst_margin](const Vector& y) {
    auto pred = penkf_predict(*ens, model.transition, model.u, cfg.localisation, cfg.solver);
    worst_margin = std::min(worst_margin, pred.feasibility_margin);
    auto upd = penkf_update(pred.ensemble, pred.predicted, y, model.h, model.v);
    *ens = std::move(upd.ensemble);
    return Posterior{upd.posterior.mean(), upd.posterior.covariance()};
  };
}

RepeatOutput run_repeat(const ExperimentConfig& cfg, const StateSpaceModel& model,
                        const std::vector<std::string>& metrics, int repeat) {
  RepeatOutput out;
  Rng truth_rng(cfg.master_seed, static_cast<std::uint64_t>(repeat), StreamPurpose::kTruth);
  const Trajectory traj = simulate_trajectory(model, cfg.steps, truth_rng);

  const bool need_kf = contains(metrics, "rmse_kf_mean") || contains(metrics, "rmse_kf_cov");
  std::vector<Posterior> kf_reference;
  if (need_kf) {
    KalmanState state{model.init_mean, model.init_cov};
    for (int k = 1; k <= cfg.steps; ++k) {
      state = kf_update(kf_predict(state, *model.transition_matrix, model.u),
                        traj.observations[static_cast<std::size_t>(k - 1)], model.h, model.v);
      kf_reference.push_back({state.mean, state.covariance});
    }
  }

  for (const auto& alg : cfg.algorithms) {
    FilterStep step;
    bool diverged = false;
    try {
      step = make_filter(alg, cfg, model, repeat, out.worst_margin);
    } catch (const Error&) {
      diverged = true;
    }
    for (int k = 1; k <= cfg.steps; ++k) {
      const auto idx = static_cast<std::size_t>(k - 1);
      Posterior post;
      if (!diverged) {
        try {
          post = step(traj.observations[idx]);
          if (!post.mean.allFinite() || post.mean.cwiseAbs().maxCoeff() > kDivergenceThreshold ||
              !post.cov.allFinite()) {
            diverged = true;
          }
        } catch (const Error&) {
          diverged = true;
        }
      }
      for (const auto& metric : metrics) {
        ResultRow row{repeat, k, alg, metric, std::numeric_limits<double>::infinity(), true};
        if (!diverged) {
          try {
            const Vector& truth = traj.states[idx + 1];
            double value = 0.0;
            if (metric == "rmse_truth") {
              value = rmse(post.mean, truth);
            } else if (metric == "rmse_kf_mean") {
              value = rmse(post.mean, kf_reference[idx].mean);
            } else if (metric == "rmse_kf_cov") {
              value = rmse(post.cov, kf_reference[idx].cov);
            } else if (metric == "logdet") {
              value = log_det(post.cov);
            } else {
              value = mahalanobis(truth, post.mean, post.cov);
            }
            if (std::isfinite(value) && std::abs(value) <= kDivergenceThreshold) {
              row.value = value;
              row.diverged = false;
            }
          } catch (const Error&) {
            // recorded as diverged
          }
        }
        out.rows.push_back(std::move(row));
      }
    }
  }
  return out;
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot open '" + path + "' for writing");
  file << contents;
  if (!file) throw IoError("failed writing '" + path + "'");
}

}  // namespace

ExperimentConfig parse_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");

  ExperimentConfig cfg;
  try {
    reject_unknown(doc,
                   {"model", "algorithms", "ensemble_N", "init_scheme", "localisation", "steps",
                    "repeats", "master_seed", "metrics", "ukf", "solver"},
                   "config");
    if (!doc.contains("model")) throw ConfigError("config needs a 'model' section");
    const json& model = doc.at("model");
    const auto type = model.value("type", std::string("linear"));
    if (type == "linear") {
      reject_unknown(model,
                     {"type", "n", "m", "lambda", "u_scale", "v_scale", "init_mean",
                      "init_var_scale"},
                     "model");
      cfg.model = ModelKind::kLinear;
      auto& lin = cfg.linear;
      read(model, "n", lin.n);
      lin.m = lin.n;
      read(model, "m", lin.m);
      read(model, "lambda", lin.lambda_coupling);
      read(model, "u_scale", lin.u_scale);
      read(model, "v_scale", lin.v_scale);
      read(model, "init_var_scale", lin.init_var_scale);
      read_mean(model, lin.init_mean);
    } else if (type == "lr96") {
      reject_unknown(model,
                     {"type", "n", "m", "forcing", "boundary_const", "dt", "u_scale", "v_scale",
                      "init_mean", "init_var_scale"},
                     "model");
      cfg.model = ModelKind::kLR96;
      auto& lr = cfg.lr96;
      read(model, "n", lr.n);
      lr.m = lr.n;
      read(model, "m", lr.m);
      read(model, "forcing", lr.forcing);
      read(model, "boundary_const", lr.boundary_const);
      read(model, "dt", lr.dt);
      read(model, "u_scale", lr.u_scale);
      read(model, "v_scale", lr.v_scale);
      read(model, "init_var_scale", lr.init_var_scale);
      read_mean(model, lr.init_mean);
    } else {
      throw ConfigError("unknown model type '" + type + "'");
    }
    read(doc, "algorithms", cfg.algorithms);
    read(doc, "ensemble_N", cfg.ensemble_n);
    if (doc.contains("init_scheme")) cfg.init_scheme = parse_scheme(doc.at("init_scheme").get<std::string>());
    if (doc.contains("localisation")) cfg.localisation = parse_pattern(doc.at("localisation"));
    read(doc, "steps", cfg.steps);
    read(doc, "repeats", cfg.repeats);
    if (doc.contains("master_seed")) {
      const json& seed = doc.at("master_seed");
      if (!seed.is_number_integer() || (seed.is_number_integer() && !seed.is_number_unsigned())) {
        throw ConfigError("master_seed must be a non-negative 64-bit integer");
      }
      cfg.master_seed = seed.get<std::uint64_t>();
    }
    read(doc, "metrics", cfg.metrics);
    if (doc.contains("ukf")) {
      const json& u = doc.at("ukf");
      reject_unknown(u, {"alpha", "kappa", "beta"}, "ukf");
      read(u, "alpha", cfg.ukf.alpha);
      read(u, "kappa", cfg.ukf.kappa);
      read(u, "beta", cfg.ukf.beta);
    }
    if (doc.contains("solver")) {
      const json& s = doc.at("solver");
      reject_unknown(s, {"newton_tol", "gap_tol", "barrier_growth", "max_newton_per_stage", "max_condition"},
                     "solver");
      read(s, "newton_tol", cfg.solver.newton_tol);
      read(s, "gap_tol", cfg.solver.gap_tol);
      read(s, "barrier_growth", cfg.solver.barrier_growth);
      read(s, "max_newton_per_stage", cfg.solver.max_newton_per_stage);
      read(s, "max_condition", cfg.solver.max_condition);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return cfg;
}

std::vector<std::string> resolved_metrics(const ExperimentConfig& cfg) {
  if (!cfg.metrics.empty()) return cfg.metrics;
  const bool kf_available = cfg.model == ModelKind::kLinear && contains(cfg.algorithms, "kf");
  std::vector<std::string> out;
  for (const auto& m : kMetrics) {
    if (!kf_available && (m == "rmse_kf_mean" || m == "rmse_kf_cov")) continue;
    out.push_back(m);
  }
  return out;
}

void validate_config(const ExperimentConfig& cfg) {
  const int n = cfg.state_dim();
  const int m = cfg.model == ModelKind::kLinear ? cfg.linear.m : cfg.lr96.m;
  if (n < 1) throw ConfigError("state dimension n must be positive");
  if (m < 1 || m > n) throw ConfigError("observed dimension must satisfy 1 <= m <= n");
  if (cfg.model == ModelKind::kLR96) {
    if (n < 4) throw ConfigError("the lr96 model needs n >= 4");
    if (!(cfg.lr96.dt > 0.0)) throw ConfigError("lr96 dt must be positive");
  }
  const double u = cfg.model == ModelKind::kLinear ? cfg.linear.u_scale : cfg.lr96.u_scale;
  const double v = cfg.model == ModelKind::kLinear ? cfg.linear.v_scale : cfg.lr96.v_scale;
  const double p0 = cfg.model == ModelKind::kLinear ? cfg.linear.init_var_scale
                                                    : cfg.lr96.init_var_scale;
  if (!(u > 0.0) || !(v > 0.0) || !(p0 > 0.0)) {
    throw ConfigError("u_scale, v_scale and init_var_scale must be positive");
  }
  const auto& mean = cfg.model == ModelKind::kLinear ? cfg.linear.init_mean : cfg.lr96.init_mean;
  if (mean && mean->size() != n) throw ConfigError("init_mean length must equal n");

  if (cfg.algorithms.empty()) throw ConfigError("at least one algorithm is required");
  std::set<std::string> seen;
  for (const auto& alg : cfg.algorithms) {
    if (!contains(kAlgorithms, alg)) throw ConfigError("unknown algorithm '" + alg + "'");
    if (!seen.insert(alg).second) throw ConfigError("algorithm '" + alg + "' listed twice");
  }
  if (contains(cfg.algorithms, "kf") && cfg.model != ModelKind::kLinear) {
    throw ConfigError("kf is only available for the linear model");
  }
  if (cfg.steps < 1) throw ConfigError("steps must be at least 1");
  if (cfg.repeats < 1) throw ConfigError("repeats must be at least 1");
  if (cfg.ensemble_n < 0) throw ConfigError("ensemble_N must be positive");

  const int count = cfg.resolved_ensemble_n();
  if (contains(cfg.algorithms, "penkf")) {
    if (cfg.localisation.kind() == SparsityPattern::Kind::kFull && count < n) {
      throw ConfigError("penkf with a full precision pattern needs ensemble_N >= n (got N = " +
                        std::to_string(count) + ", n = " + std::to_string(n) + ")");
    }
    if (cfg.init_scheme == InitScheme::kUkfFull && count != 2 * n) {
      throw ConfigError("init_scheme ukf_full requires ensemble_N = 2n");
    }
    if ((cfg.init_scheme == InitScheme::kUkfPlus || cfg.init_scheme == InitScheme::kUkfMinus) &&
        count != n) {
      throw ConfigError("init_scheme ukf_plus/ukf_minus requires ensemble_N = n");
    }
    if (cfg.localisation.kind() == SparsityPattern::Kind::kExplicit) {
      for (auto [i, j] : cfg.localisation.zeros()) {
        if (i >= n || j >= n) throw ConfigError("localisation zero index out of range");
      }
    }
  }
  const bool uses_sigma = contains(cfg.algorithms, "ukf") ||
                          (contains(cfg.algorithms, "penkf") &&
                           cfg.init_scheme != InitScheme::kRandomPrior);
  if (uses_sigma && !(static_cast<double>(n) + cfg.ukf.lambda(n) > 0.0)) {
    throw ConfigError("UKF parameters must satisfy n + lambda > 0");
  }
  if (!(cfg.solver.newton_tol > 0.0) || !(cfg.solver.gap_tol > 0.0) ||
      !(cfg.solver.barrier_growth > 1.0) || cfg.solver.max_newton_per_stage < 1 ||
      !(cfg.solver.max_condition > 1.0)) {
    throw ConfigError("solver tolerances must be positive, barrier_growth > 1 and max_condition > 1");
  }
  for (const auto& metric : resolved_metrics(cfg)) {
    if (!contains(kMetrics, metric)) throw ConfigError("unknown metric '" + metric + "'");
    if ((metric == "rmse_kf_mean" || metric == "rmse_kf_cov") &&
        (cfg.model != ModelKind::kLinear || !contains(cfg.algorithms, "kf"))) {
      throw ConfigError("metric '" + metric + "' needs the kf algorithm and the linear model");
    }
  }
}

std::string resolved_config_json(const ExperimentConfig& cfg) {
  json doc;
  const int n = cfg.state_dim();
  if (cfg.model == ModelKind::kLinear) {
    const auto& l = cfg.linear;
    doc["model"] = {{"type", "linear"},      {"n", l.n},
                    {"m", l.m},              {"lambda", l.lambda_coupling},
                    {"u_scale", l.u_scale},  {"v_scale", l.v_scale},
                    {"init_var_scale", l.init_var_scale},
                    {"init_mean", mean_json(l.init_mean, n)}};
  } else {
    const auto& l = cfg.lr96;
    doc["model"] = {{"type", "lr96"},
                    {"n", l.n},
                    {"m", l.m},
                    {"forcing", l.forcing},
                    {"boundary_const", l.boundary_const},
                    {"dt", l.dt},
                    {"u_scale", l.u_scale},
                    {"v_scale", l.v_scale},
                    {"init_var_scale", l.init_var_scale},
                    {"init_mean", mean_json(l.init_mean, n)}};
  }
  doc["algorithms"] = cfg.algorithms;
  doc["ensemble_N"] = cfg.resolved_ensemble_n();
  doc["init_scheme"] = scheme_name(cfg.init_scheme);
  doc["localisation"] = pattern_json(cfg.localisation);
  doc["steps"] = cfg.steps;
  doc["repeats"] = cfg.repeats;
  doc["master_seed"] = cfg.master_seed;
  doc["metrics"] = resolved_metrics(cfg);
  doc["ukf"] = {{"alpha", cfg.ukf.alpha}, {"kappa", cfg.ukf.kappa}, {"beta", cfg.ukf.beta}};
  doc["solver"] = {{"newton_tol", cfg.solver.newton_tol},
                   {"gap_tol", cfg.solver.gap_tol},
                   {"barrier_growth", cfg.solver.barrier_growth},
                   {"max_newton_per_stage", cfg.solver.max_newton_per_stage},
                   {"max_condition", cfg.solver.max_condition}};
  return doc.dump(2) + "\n";
}

StateSpaceModel build_model(const ExperimentConfig& cfg) {
  return cfg.model == ModelKind::kLinear ? make_linear_model(cfg.linear) : make_lr96_model(cfg.lr96);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, int threads) {
  validate_config(cfg);
  const StateSpaceModel model = build_model(cfg);
  const auto metrics = resolved_metrics(cfg);

  std::vector<RepeatOutput> outputs(static_cast<std::size_t>(cfg.repeats));
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int r = next++; r < cfg.repeats; r = next++) {
      outputs[static_cast<std::size_t>(r)] = run_repeat(cfg, model, metrics, r);
    }
  };
  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, cfg.repeats);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ExperimentResult result;
  result.worst_feasibility_margin = std::numeric_limits<double>::infinity();
  for (auto& o : outputs) {
    result.worst_feasibility_margin = std::min(result.worst_feasibility_margin, o.worst_margin);
    std::move(o.rows.begin(), o.rows.end(), std::back_inserter(result.rows));
  }
  std::stable_sort(result.rows.begin(), result.rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.repeat, a.step, a.algorithm, a.metric) <
           std::tie(b.repeat, b.step, b.algorithm, b.metric);
  });
  return result;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string rows_to_csv(const std::vector<ResultRow>& rows) {
  std::string out = "repeat,step,algorithm,metric,value,diverged\n";
  for (const auto& r : rows) {
    out += std::to_string(r.repeat);
    out += ',';
    out += std::to_string(r.step);
    out += ',';
    out += r.algorithm;
    out += ',';
    out += r.metric;
    out += ',';
    out += format_double(r.value);
    out += r.diverged ? ",1\n" : ",0\n";
  }
  return out;
}

void write_experiment(const ExperimentConfig& cfg, const ExperimentResult& result,
                      const std::string& path) {
  write_file(path, rows_to_csv(result.rows));
  write_file(path + ".json", resolved_config_json(cfg));
}

std::vector<VarianceRecoveryRow> run_variance_recovery(int n, const std::vector<int>& sample_sizes,
                                                       int trials, std::uint64_t master_seed,
                                                       const SolverOptions& options) {
  if (n < 1) throw InvalidArgument("n must be positive");
  if (trials < 1) throw InvalidArgument("trials must be positive");
  for (int size : sample_sizes) {
    if (size < n) throw InvalidArgument("every sample size must be at least n");
  }
  using Clock = std::chrono::steady_clock;
  const Matrix scale = static_cast<double>(n) * Matrix::Identity(n, n);
  const Vector zero = Vector::Zero(n);
  std::vector<VarianceRecoveryRow> rows;
  for (int trial = 0; trial < trials; ++trial) {
    Rng cov_rng(master_seed, static_cast<std::uint64_t>(trial), StreamPurpose::kCovarianceDraw);
    const Matrix truth = sample_inverse_wishart(n, static_cast<double>(n) * n, scale, cov_rng);
    const Matrix root = cholesky_lower(truth, "drawn covariance");
    const auto truth_poss = GaussianPossibility::from_covariance(zero, truth);
    for (int size : sample_sizes) {
      Rng draw(master_seed, static_cast<std::uint64_t>(trial), StreamPurpose::kSampleDraw,
               static_cast<std::uint64_t>(size));
      Matrix particles(n, size + 1);
      Vector weights(size + 1);
      particles.col(0) = zero;
      weights(0) = 1.0;
      for (int i = 1; i <= size; ++i) {
        particles.col(i) = draw.gaussian_from_factor(zero, root);
        weights(i) = eval(truth_poss, particles.col(i));
      }

      auto start = Clock::now();
      const Matrix samples = particles.rightCols(size);
      const Matrix sample_cov = samples * samples.transpose() / static_cast<double>(size);
      const double prob_seconds = std::chrono::duration<double>(Clock::now() - start).count();
      rows.push_back({n, size, trial, "probabilistic", rmse(sample_cov, truth), prob_seconds});

      start = Clock::now();
      const WeightedEnsemble ens(std::move(particles), std::move(weights));
      const FitResult fit = fit_precision(ens, SparsityPattern::full(), options);
      const Matrix fitted = spd_inverse(fit.precision, "fitted precision");
      const double poss_seconds = std::chrono::duration<double>(Clock::now() - start).count();
      rows.push_back({n, size, trial, "possibilistic", rmse(fitted, truth), poss_seconds});
    }
  }
  return rows;
}

std::string variance_rows_to_csv(const std::vector<VarianceRecoveryRow>& rows) {
  std::ostringstream out;
  out << "n,N,trial,method,rmse\n";
  for (const auto& r : rows) {
    out << r.n << ',' << r.sample_size << ',' << r.trial << ',' << r.method << ','
        << format_double(r.rmse) << '\n';
  }
  return out.str();
}

std::string variance_timing_to_csv(const std::vector<VarianceRecoveryRow>& rows) {
  std::ostringstream out;
  out << "n,N,trial,method,seconds\n";
  for (const auto& r : rows) {
    out << r.n << ',' << r.sample_size << ',' << r.trial << ',' << r.method << ','
        << format_double(r.seconds) << '\n';
  }
  return out.str();
}

}  // namespace penkf
