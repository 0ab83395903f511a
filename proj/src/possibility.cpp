#include "penkf/possibility.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "penkf/errors.hpp"

namespace penkf {

namespace {

void require_dim(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw DimensionMismatch(std::string(what) + ": expected dimension " + std::to_string(want) +
                            ", got " + std::to_string(got));
  }
}

// Clip round-off negative eigenvalues; reject genuinely indefinite input.
Matrix clean_precision(const Matrix& precision) {
  const Matrix sym = symmetrize(precision);
  if (sym.size() == 0) return sym;
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() == Eigen::Success) return sym;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  const Vector& values = eig.eigenvalues();
  const double norm = values.cwiseAbs().maxCoeff();
  if (values.minCoeff() < -1e-10 * norm) {
    throw InvalidArgument("precision matrix is not positive semidefinite");
  }
  const Vector clipped = values.cwiseMax(0.0);
  return symmetrize(eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose());
}

}  // namespace

GaussianPossibility GaussianPossibility::from_covariance(Vector mean, const Matrix& covariance) {
  require_square(covariance, "covariance");
  require_dim(covariance.rows(), mean.size(), "covariance");
  Matrix cov = symmetrize(covariance);
  Matrix precision = spd_inverse(cov, "covariance");
  return GaussianPossibility(std::move(mean), std::move(precision), std::move(cov));
}

GaussianPossibility GaussianPossibility::from_precision(Vector mean, const Matrix& precision) {
  require_square(precision, "precision");
  require_dim(precision.rows(), mean.size(), "precision");
  if (!precision.allFinite()) throw InvalidArgument("precision matrix has non-finite entries");
  Matrix prec = clean_precision(precision);
  std::optional<Matrix> cov;
  Eigen::LLT<Matrix> llt(prec);
  if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0) {
    Matrix inv = symmetrize(llt.solve(Matrix::Identity(prec.rows(), prec.cols())));
    if (inv.allFinite()) cov = std::move(inv);
  }
  return GaussianPossibility(std::move(mean), std::move(prec), std::move(cov));
}

GaussianPossibility GaussianPossibility::uninformative(Vector mean) {
  const Eigen::Index n = mean.size();
  return GaussianPossibility(std::move(mean), Matrix::Zero(n, n), std::nullopt);
}

const Matrix& GaussianPossibility::covariance() const {
  if (!covariance_) {
    throw CovarianceUnavailable("precision matrix is singular; covariance does not exist");
  }
  return *covariance_;
}

WeightedEnsemble::WeightedEnsemble(Matrix particles, Vector weights)
    : particles_(std::move(particles)), weights_(std::move(weights)) {
  if (particles_.cols() != weights_.size()) {
    throw DimensionMismatch("ensemble has " + std::to_string(particles_.cols()) + " particles but " +
                            std::to_string(weights_.size()) + " weights");
  }
  if (weights_.size() == 0) throw InvalidArgument("ensemble must contain the mode particle");
  if (weights_(0) != 1.0) throw InvalidArgument("the mode particle must have weight exactly 1");
  for (Eigen::Index i = 1; i < weights_.size(); ++i) {
    const double w = weights_(i);
    if (!std::isfinite(w) || w <= 0.0) {
      throw InvalidArgument("particle weights must lie in (0, 1]");
    }
    if (w >= 1.0) weights_(i) = kMaxNonModeWeight;
  }
}

WeightedEnsemble WeightedEnsemble::with_particles(Matrix particles) const {
  if (particles.cols() != particles_.cols()) {
    throw DimensionMismatch("particle count changed");
  }
  WeightedEnsemble out = *this;
  out.particles_ = std::move(particles);
  return out;
}

double eval(const GaussianPossibility& g, const Vector& x) {
  require_dim(x.size(), g.dim(), "eval");
  const Vector d = x - g.mean();
  const double q = d.dot(g.precision() * d);
  return std::exp(-0.5 * std::max(q, 0.0));
}

double epistemic_uncertainty(const GaussianPossibility& g) {
  if (!g.has_covariance()) return std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(g.dim());
  const double log_det_cov = spd_log_det(g.covariance(), "covariance");
  return std::exp(0.5 * (n * std::log(2.0 * std::numbers::pi) + log_det_cov));
}

GaussianPossibility bayes_update(const GaussianPossibility& prior, const Vector& obs,
                                 const Matrix& h, const Matrix& v) {
  require_dim(h.cols(), prior.dim(), "observation matrix columns");
  require_dim(obs.size(), h.rows(), "observation");
  require_square(v, "observation covariance");
  require_dim(v.rows(), h.rows(), "observation covariance");

  if (prior.has_covariance()) {
    const Matrix& cov = prior.covariance();
    const Matrix s = symmetrize(h * cov * h.transpose() + v);
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) {
      throw SingularMatrix("innovation covariance is not positive definite");
    }
    const Matrix gain = llt.solve(h * cov).transpose();
    Vector mean = prior.mean() + gain * (obs - h * prior.mean());
    const Eigen::Index n = prior.dim();
    Matrix post = symmetrize((Matrix::Identity(n, n) - gain * h) * cov);
    return GaussianPossibility::from_covariance(std::move(mean), post);
  }

  // Information form; handles singular (including zero) prior precision.
  const Matrix v_inv = spd_inverse(v, "observation covariance");
  const Matrix precision = symmetrize(prior.precision() + h.transpose() * v_inv * h);
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw SingularMatrix("posterior precision is singular; the expected value is not unique");
  }
  const Vector info = prior.precision() * prior.mean() + h.transpose() * (v_inv * obs);
  Vector mean = llt.solve(info);
  return GaussianPossibility::from_precision(std::move(mean), precision);
}

void require_invertible(const Matrix& a, const char* what) {
  if (a.rows() != a.cols()) throw SingularMatrix(std::string(what) + " must be square");
  if (a.size() == 0) return;
  Eigen::JacobiSVD<Matrix> svd(a);
  const Vector& s = svd.singularValues();
  const double smax = s(0);
  const double smin = s(s.size() - 1);
  if (!(smin > 0.0) || smax / smin > 1e12) {
    throw SingularMatrix(std::string(what) + " is singular or ill-conditioned");
  }
}

GaussianPossibility linear_transform(const GaussianPossibility& g, const Matrix& a,
                                     const Vector& b) {
  require_dim(a.cols(), g.dim(), "transform");
  require_dim(b.size(), a.rows(), "offset");
  require_invertible(a, "transform matrix");
  Vector mean = a * g.mean() + b;
  if (g.has_covariance()) {
    return GaussianPossibility::from_covariance(std::move(mean),
                                                symmetrize(a * g.covariance() * a.transpose()));
  }
  const Matrix a_inv = a.fullPivLu().inverse();
  return GaussianPossibility::from_precision(
      std::move(mean), symmetrize(a_inv.transpose() * g.precision() * a_inv));
}

AffineMap transport_map(const GaussianPossibility& source, const GaussianPossibility& target) {
  require_dim(target.dim(), source.dim(), "transport target");
  const Matrix source_root = cholesky_lower(source.covariance(), "source covariance");
  const Matrix target_root = cholesky_lower_psd(target.covariance());
  // T Lₛ = Lₜ  ⇔  Lₛᵀ Tᵀ = Lₜᵀ
  Matrix linear = source_root.transpose()
                      .triangularView<Eigen::Upper>()
                      .solve(target_root.transpose())
                      .transpose();
  Vector offset = target.mean() - linear * source.mean();
  return AffineMap{std::move(linear), std::move(offset)};
}

WeightedEnsemble apply_map(const WeightedEnsemble& ens, const AffineMap& m) {
  require_dim(m.linear.cols(), ens.dim(), "affine map");
  require_dim(m.offset.size(), m.linear.rows(), "affine map offset");
  Matrix moved = (m.linear * ens.particles()).colwise() + m.offset;
  return ens.with_particles(std::move(moved));
}

}  // namespace penkf
