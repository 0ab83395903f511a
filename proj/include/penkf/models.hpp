#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "penkf/filters.hpp"
#include "penkf/linalg.hpp"
#include "penkf/random.hpp"

namespace penkf {

/// Linear twin model: x_k = F x_{k−1} + N(0, u I), y_k = H x_k + N(0, v I), with F
/// the identity plus `lambda_coupling` on the superdiagonal.
struct LinearModelConfig {
  int n = 8;
  int m = 8;
  double lambda_coupling = 0.1;
  double u_scale = 0.01;
  double v_scale = 0.1;
  std::optional<Vector> init_mean;  ///< defaults to 0ₙ
  double init_var_scale = 10.0;
};

/// Modified Lorenz 96 model integrated with one explicit Euler step per time step;
/// the wrapped neighbours of the classical model are replaced by the constant c.
struct LR96Config {
  int n = 8;
  int m = 8;
  double forcing = 8.0;
  double boundary_const = 1.0;
  double dt = 0.01;
  double u_scale = 0.01;
  double v_scale = 0.1;
  std::optional<Vector> init_mean;
  double init_var_scale = 10.0;
};

/// Everything a filter needs to know about a twin experiment model.
struct StateSpaceModel {
  Transition transition;
  std::optional<Matrix> transition_matrix;  ///< set for linear models only
  Matrix u;                                 ///< transition uncertainty
  Matrix h;                                 ///< observation matrix
  Matrix v;                                 ///< observation noise covariance
  Vector init_mean;
  Matrix init_cov;

  Eigen::Index state_dim() const { return init_mean.size(); }
  Eigen::Index obs_dim() const { return h.rows(); }
  bool is_linear() const { return transition_matrix.has_value(); }
};

struct Trajectory {
  std::vector<Vector> states;        ///< x₀ … x_T
  std::vector<Vector> observations;  ///< y₁ … y_T
};

Matrix linear_transition_matrix(int n, double lambda);
Matrix observation_matrix(int n, int m);
Vector lr96_step(const Vector& x, const LR96Config& cfg);

StateSpaceModel make_linear_model(const LinearModelConfig& cfg);
StateSpaceModel make_lr96_model(const LR96Config& cfg);

Trajectory simulate_trajectory(const StateSpaceModel& model, int steps, Rng& rng);

/// Draw from the inverse-Wishart distribution IW(dof, scale) via the Bartlett
/// decomposition of the Wishart(dof, scale⁻¹) and inversion.
Matrix sample_inverse_wishart(int n, double dof, const Matrix& scale, Rng& rng);

}  // namespace penkf
