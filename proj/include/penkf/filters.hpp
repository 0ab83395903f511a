#pragma once

#include <functional>

#include "penkf/linalg.hpp"
#include "penkf/maxdet_fit.hpp"
#include "penkf/possibility.hpp"
#include "penkf/random.hpp"

namespace penkf {

/// Deterministic part of the state transition, x ↦ F(x).
using Transition = std::function<Vector(const Vector&)>;
/// Nonlinear observation map and its Jacobian.
using ObservationMap = std::function<Vector(const Vector&)>;
using Jacobian = std::function<Matrix(const Vector&)>;

Transition linear_transition(Matrix f);

struct KalmanState {
  Vector mean;
  Matrix covariance;
};

/// Unweighted ensemble, one member per column. Sample covariances use divisor N − 1.
struct ProbEnsemble {
  Matrix members;

  Eigen::Index size() const { return members.cols(); }
  Eigen::Index dim() const { return members.rows(); }
};

struct EnsembleMoments {
  Vector mean;
  Matrix covariance;
};

EnsembleMoments ensemble_moments(const ProbEnsemble& ens);

struct UKFConfig {
  double alpha = 0.25;
  double kappa = 130.0;
  double beta = 2.0;

  double lambda(Eigen::Index n) const {
    const auto dn = static_cast<double>(n);
    return alpha * alpha * (dn + kappa) - dn;
  }
};

enum class InitScheme { kRandomPrior, kUkfFull, kUkfPlus, kUkfMinus };

struct GainPair {
  Matrix standard_gain;  ///< K = Σ Hᵀ S⁻¹
  Matrix adjusted_gain;  ///< K̃ = Σ Hᵀ chol(S)⁻ᵀ (chol(S) + chol(V))⁻¹
  Matrix innovation_cov;
};

// Kalman filter.
KalmanState kf_predict(const KalmanState& s, const Matrix& f, const Matrix& u);
KalmanState kf_update(const KalmanState& s, const Vector& y, const Matrix& h, const Matrix& v);

// Probabilistic ensemble filters.
struct EnsemblePrediction {
  ProbEnsemble ensemble;
  Vector mean;
  Matrix covariance;
};

EnsemblePrediction enkf_predict(const ProbEnsemble& ens, const Transition& f, const Matrix& u,
                                Rng& rng);
GainPair compute_gains(const Matrix& cov, const Matrix& h, const Matrix& v);
ProbEnsemble sqrt_enkf_update(const ProbEnsemble& ens, const Vector& mean, const Matrix& cov,
                              const Vector& y, const Matrix& h, const Matrix& v);
ProbEnsemble stenkf_update(const ProbEnsemble& ens, const Vector& mean, const Matrix& cov,
                           const Vector& y, const Matrix& h, const Matrix& v, Rng& rng);

// Unscented Kalman filter.
/// Columns μ, μ + Lⱼ, μ − Lⱼ with L = chol((n + λ) Σ).
Matrix ukf_sigma_points(const Vector& mean, const Matrix& cov, const UKFConfig& cfg);
KalmanState ukf_predict(const KalmanState& s, const Transition& f, const Matrix& u,
                        const UKFConfig& cfg);
KalmanState ukf_step(const KalmanState& s, const Transition& f, const Matrix& u, const Vector& y,
                     const Matrix& h, const Matrix& v, const UKFConfig& cfg);

// Possibilistic ensemble Kalman filter.
WeightedEnsemble penkf_init(const GaussianPossibility& prior, Eigen::Index count,
                            InitScheme scheme, const UKFConfig& cfg, Rng& rng);

struct PenkfPrediction {
  WeightedEnsemble ensemble;
  GaussianPossibility predicted;
  FitResult fit;                  ///< fit of the propagated (pre-transport) ensemble
  double feasibility_margin = 0;  ///< minᵢ N̄(x̃ᵢ; fit) − wᵢ on the propagated ensemble
};

PenkfPrediction penkf_predict(const WeightedEnsemble& ens, const Transition& f, const Matrix& u,
                              const SparsityPattern& pattern, const SolverOptions& options = {});

struct PenkfUpdate {
  WeightedEnsemble ensemble;
  GaussianPossibility posterior;
};

PenkfUpdate penkf_update(const WeightedEnsemble& ens, const GaussianPossibility& pred,
                         const Vector& y, const Matrix& h, const Matrix& v);

/// Update with the observation model linearised at the predicted expected value.
PenkfUpdate penkf_update_linearised(const WeightedEnsemble& ens, const GaussianPossibility& pred,
                                    const Vector& y, const ObservationMap& h_map,
                                    const Jacobian& jacobian, const Matrix& v);

}  // namespace penkf
