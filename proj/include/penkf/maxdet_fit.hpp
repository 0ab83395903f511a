#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "penkf/linalg.hpp"
#include "penkf/possibility.hpp"

namespace penkf {

/// Which entries of the precision matrix are allowed to be nonzero.
///
/// A zero entry Λ_ij = 0 models conditional independence of components i and j.
/// `banded(1)` keeps only the diagonal, `banded(2)` is tridiagonal, and so on.
class SparsityPattern {
 public:
  enum class Kind { kFull, kBanded, kExplicit };

  static SparsityPattern full() { return SparsityPattern(Kind::kFull, 0, {}); }
  static SparsityPattern banded(int bandwidth);
  /// `zeros` lists off-diagonal index pairs forced to zero; the set is
  /// symmetrized. Diagonal pairs are rejected.
  static SparsityPattern explicit_zeros(std::vector<std::pair<int, int>> zeros);

  Kind kind() const { return kind_; }
  int bandwidth() const { return bandwidth_; }
  /// Sorted, symmetric zero set (only meaningful for kExplicit).
  const std::vector<std::pair<int, int>>& zeros() const { return zeros_; }

  bool is_free(int i, int j) const;
  /// Free entries (i ≤ j) of an n×n symmetric matrix, row-major.
  std::vector<std::pair<int, int>> free_entries(int n) const;
  Matrix project(const Matrix& a) const;

 private:
  SparsityPattern(Kind kind, int bandwidth, std::vector<std::pair<int, int>> zeros)
      : kind_(kind), bandwidth_(bandwidth), zeros_(std::move(zeros)) {}

  Kind kind_;
  int bandwidth_;
  std::vector<std::pair<int, int>> zeros_;
};

/// Constraint data of the best-fitting Gaussian problem:
/// maximize log|Λ| subject to dᵢᵀ Λ dᵢ ≤ bᵢ, Λ ⪰ 0, Λ zero off the pattern.
///
/// Each constraint matrix Cᵢ = dᵢ dᵢᵀ is rank one and is kept in factored form.
struct PrecisionFitProblem {
  Matrix deviations;  ///< n × N, column i is xᵢ − x₀
  Vector bounds;      ///< bᵢ = −2 log wᵢ > 0
  SparsityPattern pattern = SparsityPattern::full();

  static PrecisionFitProblem from_ensemble(const WeightedEnsemble& ens,
                                           const SparsityPattern& pattern);

  Eigen::Index dimension() const { return deviations.rows(); }
  Eigen::Index constraint_count() const { return deviations.cols(); }
  Matrix outer_product(Eigen::Index i) const {
    return deviations.col(i) * deviations.col(i).transpose();
  }
};

struct FitResult {
  Matrix precision;
  Vector slacks;  ///< bᵢ − Tr(Cᵢ Λ*)
  int iterations = 0;
  double barrier_final = 0.0;
};

struct SolverOptions {
  double newton_tol = 1e-10;      ///< stop centering when λ²/2 falls below this
  double gap_tol = 1e-9;          ///< stop when N / t falls below this
  double barrier_growth = 10.0;   ///< t ← growth · t between stages
  int max_newton_per_stage = 200;
  double divergence_factor = 1e12;  ///< ‖Λ‖ growth that signals an unbounded problem
  double max_condition = 1e7;  ///< cond(S Λ S) above this is reported as unbounded
};

FitResult solve_precision_fit(const PrecisionFitProblem& problem, const SolverOptions& options = {});

/// Precision of the tightest Gaussian possibility function N̄(x₀, Λ⁻¹) that
/// upper-bounds the ensemble at every particle.
FitResult fit_precision(const WeightedEnsemble& ens, const SparsityPattern& pattern,
                        const SolverOptions& options = {});

/// Closed form for n = 1: Λ = minᵢ (−2 log wᵢ) / (xᵢ − x₀)², i.e. the largest
/// precision that keeps every particle feasible. `fit_precision` uses it for n = 1.
double fit_precision_1d(const WeightedEnsemble& ens);

GaussianPossibility gaussian_from_ensemble(const WeightedEnsemble& ens,
                                           const SparsityPattern& pattern,
                                           const SolverOptions& options = {});

/// Per-particle gaps −Tr(Cᵢ Λ) − 2 log wᵢ for i = 1..N. Zero means the
/// constraint is active; larger gaps indicate departure from Gaussianity.
Vector nongaussianity_gaps(const WeightedEnsemble& ens, const FitResult& fit);

/// minᵢ (N̄(xᵢ; x₀, Λ⁻¹) − wᵢ) over the non-mode particles.
double feasibility_margin(const WeightedEnsemble& ens, const Matrix& precision);

}  // namespace penkf
