#include "penkf/linalg.hpp"

#include <cmath>
#include <string>

#include "penkf/errors.hpp"

namespace penkf {

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

void require_square(const Matrix& a, std::string_view what) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatch(std::string(what) + " must be square, got " + std::to_string(a.rows()) +
                            "x" + std::to_string(a.cols()));
  }
}

Matrix cholesky_lower(const Matrix& a, std::string_view what) {
  require_square(a, what);
  if (!a.allFinite()) {
    throw NotPositiveDefinite(std::string(what) + " has non-finite entries");
  }
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite(std::string(what) + " is not positive definite");
  }
  return llt.matrixL();
}

Matrix cholesky_lower_psd(const Matrix& a) {
  require_square(a, "covariance");
  const Eigen::Index n = a.rows();
  Matrix l = Matrix::Zero(n, n);
  const double scale = a.diagonal().cwiseAbs().maxCoeff();
  if (n == 0 || scale == 0.0) return l;
  const double tol = 1e-14 * scale;
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (d <= tol) continue;
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
    }
  }
  return l;
}

Matrix lower_inverse(const Matrix& lower) {
  return lower.triangularView<Eigen::Lower>().solve(Matrix::Identity(lower.rows(), lower.cols()));
}

Matrix spd_inverse(const Matrix& a, std::string_view what) {
  require_square(a, what);
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite(std::string(what) + " is not positive definite");
  }
  return symmetrize(llt.solve(Matrix::Identity(a.rows(), a.cols())));
}

double spd_log_det(const Matrix& a, std::string_view what) {
  const Matrix l = cholesky_lower(a, what);
  return 2.0 * l.diagonal().array().log().sum();
}

bool is_symmetric(const Matrix& a, double rel_tol) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

}  // namespace penkf
