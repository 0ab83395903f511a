#pragma once

#include <string_view>

#include <Eigen/Dense>

namespace penkf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// (A + Aᵀ) / 2.
Matrix symmetrize(const Matrix& a);

/// Lower-triangular L with A = L Lᵀ. Throws NotPositiveDefinite on failure.
Matrix cholesky_lower(const Matrix& a, std::string_view what = "matrix");

/// Unpivoted Cholesky that tolerates positive-semidefinite input: a column whose
/// pivot is not positive (relative to the largest diagonal entry) is set to zero.
/// Used for noise covariances that may legitimately be zero.
Matrix cholesky_lower_psd(const Matrix& a);

/// Inverse of an SPD matrix via its Cholesky factor, symmetrized.
Matrix spd_inverse(const Matrix& a, std::string_view what = "matrix");

/// log|A| for SPD A from its Cholesky diagonal.
double spd_log_det(const Matrix& a, std::string_view what = "matrix");

/// Returns L⁻¹ for a lower-triangular L.
Matrix lower_inverse(const Matrix& lower);

bool is_symmetric(const Matrix& a, double rel_tol = 1e-10);

void require_square(const Matrix& a, std::string_view what);

}  // namespace penkf
