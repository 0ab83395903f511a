#include "penkf/models.hpp"

#include <cmath>
#include <string>

#include "penkf/errors.hpp"

namespace penkf {

Matrix linear_transition_matrix(int n, double lambda) {
  if (n < 1) throw InvalidArgument("state dimension must be positive");
  Matrix f = Matrix::Identity(n, n);
  for (int i = 0; i + 1 < n; ++i) f(i, i + 1) = lambda;
  return f;
}

Matrix observation_matrix(int n, int m) {
  if (m < 1 || m > n) {
    throw InvalidArgument("observed dimension must satisfy 1 <= m <= n, got m = " +
                          std::to_string(m) + ", n = " + std::to_string(n));
  }
  Matrix h = Matrix::Zero(m, n);
  h.leftCols(m).setIdentity();
  return h;
}

Vector lr96_step(const Vector& x, const LR96Config& cfg) {
  const Eigen::Index n = x.size();
  if (n < 4) throw InvalidArgument("the Lorenz 96 stencil needs n >= 4");
  const double c = cfg.boundary_const;
  const double f = cfg.forcing;
  Vector advection(n);
  advection(0) = (x(1) - c) * c;
  advection(1) = (x(2) - c) * x(0);
  for (Eigen::Index i = 2; i + 1 < n; ++i) {
    advection(i) = (x(i + 1) - x(i - 2)) * x(i - 1);
  }
  advection(n - 1) = (c - x(n - 3)) * x(n - 2);
  return x + (advection - x + Vector::Constant(n, f)) * cfg.dt;
}

namespace {

Vector resolve_mean(const std::optional<Vector>& mean, int n) {
  if (!mean) return Vector::Zero(n);
  if (mean->size() != n) throw DimensionMismatch("init_mean length must equal n");
  return *mean;
}

void check_scales(double u, double v, double init) {
  if (u < 0.0 || v < 0.0 || init < 0.0) throw InvalidArgument("noise scales must be non-negative");
}

}  // namespace

StateSpaceModel make_linear_model(const LinearModelConfig& cfg) {
  check_scales(cfg.u_scale, cfg.v_scale, cfg.init_var_scale);
  Matrix f = linear_transition_matrix(cfg.n, cfg.lambda_coupling);
  StateSpaceModel model;
  model.transition = linear_transition(f);
  model.transition_matrix = std::move(f);
  model.u = cfg.u_scale * Matrix::Identity(cfg.n, cfg.n);
  model.h = observation_matrix(cfg.n, cfg.m);
  model.v = cfg.v_scale * Matrix::Identity(cfg.m, cfg.m);
  model.init_mean = resolve_mean(cfg.init_mean, cfg.n);
  model.init_cov = cfg.init_var_scale * Matrix::Identity(cfg.n, cfg.n);
  return model;
}

StateSpaceModel make_lr96_model(const LR96Config& cfg) {
  if (cfg.n < 4) throw InvalidArgument("the Lorenz 96 model needs n >= 4");
  if (!(cfg.dt > 0.0)) throw InvalidArgument("time step must be positive");
  check_scales(cfg.u_scale, cfg.v_scale, cfg.init_var_scale);
  StateSpaceModel model;
  model.transition = [cfg](const Vector& x) -> Vector { return lr96_step(x, cfg); };
  model.u = cfg.u_scale * Matrix::Identity(cfg.n, cfg.n);
  model.h = observation_matrix(cfg.n, cfg.m);
  model.v = cfg.v_scale * Matrix::Identity(cfg.m, cfg.m);
  model.init_mean = resolve_mean(cfg.init_mean, cfg.n);
  model.init_cov = cfg.init_var_scale * Matrix::Identity(cfg.n, cfg.n);
  return model;
}

Trajectory simulate_trajectory(const StateSpaceModel& model, int steps, Rng& rng) {
  if (steps < 0) throw InvalidArgument("steps must be non-negative");
  const Matrix init_root = cholesky_lower_psd(model.init_cov);
  const Matrix u_root = cholesky_lower_psd(model.u);
  const Matrix v_root = cholesky_lower_psd(model.v);
  Trajectory traj;
  traj.states.reserve(static_cast<std::size_t>(steps) + 1);
  traj.observations.reserve(static_cast<std::size_t>(steps));
  traj.states.push_back(rng.gaussian_from_factor(model.init_mean, init_root));
  for (int k = 1; k <= steps; ++k) {
    Vector x = rng.gaussian_from_factor(model.transition(traj.states.back()), u_root);
    traj.observations.push_back(rng.gaussian_from_factor(model.h * x, v_root));
    traj.states.push_back(std::move(x));
  }
  return traj;
}

Matrix sample_inverse_wishart(int n, double dof, const Matrix& scale, Rng& rng) {
  if (n < 1) throw InvalidArgument("dimension must be positive");
  if (!(dof > n - 1)) throw InvalidArgument("inverse-Wishart needs dof > n - 1");
  if (scale.rows() != n || scale.cols() != n) throw DimensionMismatch("scale must be n x n");
  // W ~ Wishart(dof, Ψ⁻¹) = L A Aᵀ Lᵀ with L = chol(Ψ⁻¹); then W⁻¹ ~ IW(dof, Ψ).
  const Matrix l = cholesky_lower(spd_inverse(scale, "scale"), "inverse scale");
  Matrix a = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    a(i, i) = std::sqrt(rng.chi_squared(dof - i));
    for (int j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  const Matrix la = l * a;
  // (LA)⁻ᵀ (LA)⁻¹ without forming W.
  const Matrix la_inv = la.triangularView<Eigen::Lower>().solve(Matrix::Identity(n, n));
  return symmetrize(la_inv.transpose() * la_inv);
}

}  // namespace penkf
