#pragma once

#include <optional>

#include "penkf/linalg.hpp"

namespace penkf {

/// Gaussian possibility function x ↦ exp(−½ (x−μ)ᵀ Λ (x−μ)).
///
/// The precision Λ is always stored and may be singular (the zero matrix is the
/// uninformative possibility function). The covariance Σ = Λ⁻¹ is stored only
/// when Λ is nonsingular; `covariance()` throws CovarianceUnavailable otherwise.
class GaussianPossibility {
 public:
  /// Σ must be symmetric positive definite.
  static GaussianPossibility from_covariance(Vector mean, const Matrix& covariance);
  /// Λ must be symmetric positive semidefinite. Eigenvalues in
  /// [−1e−10·‖Λ‖, 0) are treated as round-off and clipped to zero; anything
  /// more negative is rejected.
  static GaussianPossibility from_precision(Vector mean, const Matrix& precision);
  /// N̄(mean, ·) with Λ = 0, i.e. the possibility function equal to one everywhere.
  static GaussianPossibility uninformative(Vector mean);

  const Vector& mean() const { return mean_; }
  const Matrix& precision() const { return precision_; }
  bool has_covariance() const { return covariance_.has_value(); }
  const Matrix& covariance() const;
  Eigen::Index dim() const { return mean_.size(); }

 private:
  GaussianPossibility(Vector mean, Matrix precision, std::optional<Matrix> covariance)
      : mean_(std::move(mean)), precision_(std::move(precision)), covariance_(std::move(covariance)) {}

  Vector mean_;
  Matrix precision_;
  std::optional<Matrix> covariance_;
};

/// N+1 particles (columns 0..N) with weights in (0, 1]. Particle 0 is the mode
/// and carries weight exactly 1; the other weights are strictly below 1.
class WeightedEnsemble {
 public:
  /// Largest weight admitted for a non-mode particle. Larger values are clamped here.
  static constexpr double kMaxNonModeWeight = 1.0 - 1e-12;

  /// `weights(0)` must equal 1. Non-mode weights must be positive and finite;
  /// values ≥ 1 are clamped to kMaxNonModeWeight.
  WeightedEnsemble(Matrix particles, Vector weights);

  const Matrix& particles() const { return particles_; }
  const Vector& weights() const { return weights_; }
  Vector mode() const { return particles_.col(0); }
  Eigen::Index dim() const { return particles_.rows(); }
  /// N, the number of non-mode particles.
  Eigen::Index size() const { return particles_.cols() - 1; }

  /// Same weights, new particle positions.
  WeightedEnsemble with_particles(Matrix particles) const;

 private:
  Matrix particles_;
  Vector weights_;
};

/// x ↦ linear·x + offset.
struct AffineMap {
  Matrix linear;
  Vector offset;

  Vector operator()(const Vector& x) const { return linear * x + offset; }
};

double eval(const GaussianPossibility& g, const Vector& x);

/// √|2πΣ|; +∞ when the precision is singular.
double epistemic_uncertainty(const GaussianPossibility& g);

/// Posterior for the likelihood N(obs; Hx, V), normalized to have supremum one.
GaussianPossibility bayes_update(const GaussianPossibility& prior, const Vector& obs,
                                 const Matrix& h, const Matrix& v);

/// Possibility function describing A x + b when x is described by g.
GaussianPossibility linear_transform(const GaussianPossibility& g, const Matrix& a,
                                     const Vector& b);

/// Affine map carrying `source` onto `target`: M(x) = μ̃ + T(x − μ) with
/// T = chol(Σ̃) chol(Σ)⁻¹ (lower factors).
AffineMap transport_map(const GaussianPossibility& source, const GaussianPossibility& target);

WeightedEnsemble apply_map(const WeightedEnsemble& ens, const AffineMap& m);

/// Throws SingularMatrix when `a` is not square or its condition number exceeds 1e12.
void require_invertible(const Matrix& a, const char* what);

}  // namespace penkf
