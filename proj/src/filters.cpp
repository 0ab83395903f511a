#include "penkf/filters.hpp"

#include <string>

#include "penkf/errors.hpp"

namespace penkf {

namespace {

void require_rows(const Matrix& a, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (a.rows() != rows || a.cols() != cols) {
    throw DimensionMismatch(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                            std::to_string(cols) + ", got " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()));
  }
}

void require_size(const Vector& v, Eigen::Index size, const char* what) {
  if (v.size() != size) {
    throw DimensionMismatch(std::string(what) + ": expected length " + std::to_string(size) +
                            ", got " + std::to_string(v.size()));
  }
}

Matrix propagate(const Matrix& members, const Transition& f) {
  Matrix out(members.rows(), members.cols());
  for (Eigen::Index i = 0; i < members.cols(); ++i) {
    Vector image = f(members.col(i));
    require_size(image, members.rows(), "transition output");
    out.col(i) = image;
  }
  return out;
}

// Shared by the p-EnKF update and its linearised variant: particle 0 is placed on
// the posterior expected value, the rest keep their deviations mapped by (I − K̃H).
PenkfUpdate penkf_affine_update(const WeightedEnsemble& ens, const GaussianPossibility& pred,
                                const Vector& innovation, const Matrix& h, const Matrix& v) {
  const Eigen::Index n = ens.dim();
  require_size(pred.mean(), n, "predicted expected value");
  const Matrix& cov = pred.covariance();
  const GainPair gains = compute_gains(cov, h, v);
  const Vector& mu = pred.mean();
  Vector post_mean = mu + gains.standard_gain * innovation;
  const Matrix contraction = Matrix::Identity(n, n) - gains.adjusted_gain * h;

  Matrix particles(n, ens.particles().cols());
  particles.col(0) = post_mean;
  for (Eigen::Index i = 1; i < particles.cols(); ++i) {
    particles.col(i) = post_mean + contraction * (ens.particles().col(i) - mu);
  }
  Matrix post_cov = symmetrize((Matrix::Identity(n, n) - gains.standard_gain * h) * cov);
  auto posterior = GaussianPossibility::from_covariance(post_mean, post_cov);
  return PenkfUpdate{ens.with_particles(std::move(particles)), std::move(posterior)};
}

}  // namespace

Transition linear_transition(Matrix f) {
  return [f = std::move(f)](const Vector& x) -> Vector { return f * x; };
}

EnsembleMoments ensemble_moments(const ProbEnsemble& ens) {
  const Eigen::Index count = ens.size();
  if (count < 2) throw InvalidArgument("ensemble needs at least two members");
  Vector mean = ens.members.rowwise().mean();
  const Matrix dev = ens.members.colwise() - mean;
  Matrix cov = symmetrize(dev * dev.transpose() / static_cast<double>(count - 1));
  return {std::move(mean), std::move(cov)};
}

KalmanState kf_predict(const KalmanState& s, const Matrix& f, const Matrix& u) {
  const Eigen::Index n = s.mean.size();
  require_rows(f, n, n, "transition matrix");
  require_rows(u, n, n, "transition covariance");
  return {f * s.mean, symmetrize(f * s.covariance * f.transpose() + u)};
}

KalmanState kf_update(const KalmanState& s, const Vector& y, const Matrix& h, const Matrix& v) {
  const Eigen::Index n = s.mean.size();
  require_rows(h, y.size(), n, "observation matrix");
  require_rows(v, y.size(), y.size(), "observation covariance");
  const Matrix s_cov = symmetrize(h * s.covariance * h.transpose() + v);
  Eigen::LLT<Matrix> llt(s_cov);
  if (llt.info() != Eigen::Success) {
    throw SingularMatrix("innovation covariance is not positive definite");
  }
  const Matrix gain = llt.solve(h * s.covariance).transpose();
  return {s.mean + gain * (y - h * s.mean),
          symmetrize((Matrix::Identity(n, n) - gain * h) * s.covariance)};
}

EnsemblePrediction enkf_predict(const ProbEnsemble& ens, const Transition& f, const Matrix& u,
                                Rng& rng) {
  const Eigen::Index n = ens.dim();
  require_rows(u, n, n, "transition covariance");
  const Matrix noise_root = cholesky_lower_psd(u);
  Matrix members = propagate(ens.members, f);
  for (Eigen::Index i = 0; i < members.cols(); ++i) {
    members.col(i) += noise_root * rng.standard_normal(n);
  }
  ProbEnsemble out{std::move(members)};
  auto moments = ensemble_moments(out);
  return {std::move(out), std::move(moments.mean), std::move(moments.covariance)};
}

GainPair compute_gains(const Matrix& cov, const Matrix& h, const Matrix& v) {
  const Eigen::Index n = cov.rows();
  require_rows(cov, n, n, "covariance");
  require_rows(h, h.rows(), n, "observation matrix");
  require_rows(v, h.rows(), h.rows(), "observation covariance");

  const Matrix s = symmetrize(h * cov * h.transpose() + v);
  const Matrix s_root = cholesky_lower(s, "innovation covariance");
  const Matrix v_root = cholesky_lower_psd(v);
  const Matrix cross = cov * h.transpose();  // Σ Hᵀ, n × m

  // K = Σ Hᵀ S⁻¹ via two triangular solves.
  const Matrix half = s_root.triangularView<Eigen::Lower>().solve(cross.transpose());  // L⁻¹ H Σ
  Matrix k = s_root.transpose().triangularView<Eigen::Upper>().solve(half).transpose();

  // K̃ = Σ Hᵀ L⁻ᵀ (L + V½)⁻¹
  const Matrix b = half.transpose();  // Σ Hᵀ L⁻ᵀ
  const Matrix sum_root = s_root + v_root;
  Matrix k_adj =
      sum_root.transpose().triangularView<Eigen::Upper>().solve(b.transpose()).transpose();
  return GainPair{std::move(k), std::move(k_adj), s};
}

ProbEnsemble sqrt_enkf_update(const ProbEnsemble& ens, const Vector& mean, const Matrix& cov,
                              const Vector& y, const Matrix& h, const Matrix& v) {
  const Eigen::Index n = ens.dim();
  require_size(mean, n, "ensemble mean");
  const GainPair gains = compute_gains(cov, h, v);
  const Vector post_mean = mean + gains.standard_gain * (y - h * mean);
  const Matrix contraction = Matrix::Identity(n, n) - gains.adjusted_gain * h;
  Matrix members = (contraction * (ens.members.colwise() - mean)).colwise() + post_mean;
  return ProbEnsemble{std::move(members)};
}

ProbEnsemble stenkf_update(const ProbEnsemble& ens, const Vector& mean, const Matrix& cov,
                           const Vector& y, const Matrix& h, const Matrix& v, Rng& rng) {
  require_size(mean, ens.dim(), "ensemble mean");
  require_size(y, h.rows(), "observation");
  const GainPair gains = compute_gains(cov, h, v);
  const Matrix noise_root = cholesky_lower_psd(v);
  Matrix members = ens.members;
  for (Eigen::Index i = 0; i < members.cols(); ++i) {
    const Vector perturbed = y + noise_root * rng.standard_normal(y.size());
    members.col(i) += gains.standard_gain * (perturbed - h * members.col(i));
  }
  return ProbEnsemble{std::move(members)};
}

Matrix ukf_sigma_points(const Vector& mean, const Matrix& cov, const UKFConfig& cfg) {
  const Eigen::Index n = mean.size();
  require_rows(cov, n, n, "covariance");
  const double spread = static_cast<double>(n) + cfg.lambda(n);
  if (!(spread > 0.0)) throw InvalidArgument("UKF parameters require n + λ > 0");
  const Matrix root = cholesky_lower(spread * cov, "scaled covariance");
  Matrix points(n, 2 * n + 1);
  points.col(0) = mean;
  for (Eigen::Index j = 0; j < n; ++j) {
    points.col(1 + j) = mean + root.col(j);
    points.col(1 + n + j) = mean - root.col(j);
  }
  return points;
}

KalmanState ukf_predict(const KalmanState& s, const Transition& f, const Matrix& u,
                        const UKFConfig& cfg) {
  const Eigen::Index n = s.mean.size();
  require_rows(u, n, n, "transition covariance");
  const double lambda = cfg.lambda(n);
  const double spread = static_cast<double>(n) + lambda;
  const Matrix images = propagate(ukf_sigma_points(s.mean, s.covariance, cfg), f);

  const double w_mean0 = lambda / spread;
  const double w_cov0 = w_mean0 + 1.0 - cfg.alpha * cfg.alpha + cfg.beta;
  const double w = 0.5 / spread;

  Vector mean = w_mean0 * images.col(0);
  for (Eigen::Index j = 1; j < images.cols(); ++j) mean += w * images.col(j);

  Matrix cov = u;
  Vector d = images.col(0) - mean;
  cov += w_cov0 * d * d.transpose();
  for (Eigen::Index j = 1; j < images.cols(); ++j) {
    d = images.col(j) - mean;
    cov += w * d * d.transpose();
  }
  return {std::move(mean), symmetrize(cov)};
}

KalmanState ukf_step(const KalmanState& s, const Transition& f, const Matrix& u, const Vector& y,
                     const Matrix& h, const Matrix& v, const UKFConfig& cfg) {
  return kf_update(ukf_predict(s, f, u, cfg), y, h, v);
}

WeightedEnsemble penkf_init(const GaussianPossibility& prior, Eigen::Index count,
                            InitScheme scheme, const UKFConfig& cfg, Rng& rng) {
  const Eigen::Index n = prior.dim();
  const Vector& mu = prior.mean();
  Matrix particles(n, count + 1);
  particles.col(0) = mu;

  switch (scheme) {
    case InitScheme::kRandomPrior: {
      if (count < 1) throw InvalidArgument("random initialisation needs at least one particle");
      const Matrix root = cholesky_lower(prior.covariance(), "prior covariance");
      for (Eigen::Index i = 1; i <= count; ++i) {
        particles.col(i) = rng.gaussian_from_factor(mu, root);
      }
      break;
    }
    case InitScheme::kUkfFull: {
      if (count != 2 * n) {
        throw InvalidArgument("UKF initialisation requires N = 2n, got N = " + std::to_string(count));
      }
      particles.rightCols(2 * n) = ukf_sigma_points(mu, prior.covariance(), cfg).rightCols(2 * n);
      break;
    }
    case InitScheme::kUkfPlus:
    case InitScheme::kUkfMinus: {
      if (count != n) {
        throw InvalidArgument("one-sided UKF initialisation requires N = n, got N = " +
                              std::to_string(count));
      }
      const Matrix sigma = ukf_sigma_points(mu, prior.covariance(), cfg);
      particles.rightCols(n) =
          scheme == InitScheme::kUkfPlus ? sigma.middleCols(1, n) : sigma.rightCols(n);
      break;
    }
  }

  Vector weights(count + 1);
  weights(0) = 1.0;
  for (Eigen::Index i = 1; i <= count; ++i) weights(i) = eval(prior, particles.col(i));
  return WeightedEnsemble(std::move(particles), std::move(weights));
}

PenkfPrediction penkf_predict(const WeightedEnsemble& ens, const Transition& f, const Matrix& u,
                              const SparsityPattern& pattern, const SolverOptions& options) {
  const Eigen::Index n = ens.dim();
  require_rows(u, n, n, "transition covariance");
  const WeightedEnsemble propagated = ens.with_particles(propagate(ens.particles(), f));
  const Vector mu = propagated.mode();

  FitResult fit = fit_precision(propagated, pattern, options);
  const double margin = feasibility_margin(propagated, fit.precision);
  const Matrix fitted_cov = spd_inverse(fit.precision, "fitted precision");
  const Matrix predicted_cov = symmetrize(fitted_cov + u);

  // T = chol(Σ̃ + U) chol(Σ̃)⁻¹ carries N̄(μ, Σ̃) onto N̄(μ, Σ̃ + U).
  const Matrix fitted_root = cholesky_lower(fitted_cov, "fitted covariance");
  const Matrix predicted_root = cholesky_lower(predicted_cov, "predicted covariance");
  const Matrix transport = fitted_root.transpose()
                               .triangularView<Eigen::Upper>()
                               .solve(predicted_root.transpose())
                               .transpose();

  Matrix particles(n, propagated.particles().cols());
  particles.col(0) = mu;
  for (Eigen::Index i = 1; i < particles.cols(); ++i) {
    particles.col(i) = mu + transport * (propagated.particles().col(i) - mu);
  }
  return PenkfPrediction{ens.with_particles(std::move(particles)),
                         GaussianPossibility::from_covariance(mu, predicted_cov), std::move(fit),
                         margin};
}

PenkfUpdate penkf_update(const WeightedEnsemble& ens, const GaussianPossibility& pred,
                         const Vector& y, const Matrix& h, const Matrix& v) {
  require_size(y, h.rows(), "observation");
  return penkf_affine_update(ens, pred, y - h * pred.mean(), h, v);
}

PenkfUpdate penkf_update_linearised(const WeightedEnsemble& ens, const GaussianPossibility& pred,
                                    const Vector& y, const ObservationMap& h_map,
                                    const Jacobian& jacobian, const Matrix& v) {
  const Matrix j = jacobian(pred.mean());
  require_size(y, j.rows(), "observation");
  const Vector predicted_obs = h_map(pred.mean());
  require_size(predicted_obs, y.size(), "observation map output");
  return penkf_affine_update(ens, pred, y - predicted_obs, j, v);
}

}  // namespace penkf
