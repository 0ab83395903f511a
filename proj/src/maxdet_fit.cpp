#include "penkf/maxdet_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "penkf/errors.hpp"

namespace penkf {

SparsityPattern SparsityPattern::banded(int bandwidth) {
  if (bandwidth < 1) throw InvalidArgument("bandwidth must be a positive integer");
  return SparsityPattern(Kind::kBanded, bandwidth, {});
}

SparsityPattern SparsityPattern::explicit_zeros(std::vector<std::pair<int, int>> zeros) {
  std::set<std::pair<int, int>> sym;
  for (auto [i, j] : zeros) {
    if (i < 0 || j < 0) throw InvalidArgument("zero-set indices must be non-negative");
    if (i == j) throw InvalidArgument("diagonal entries cannot be forced to zero");
    sym.emplace(i, j);
    sym.emplace(j, i);
  }
  return SparsityPattern(Kind::kExplicit, 0, {sym.begin(), sym.end()});
}

bool SparsityPattern::is_free(int i, int j) const {
  switch (kind_) {
    case Kind::kFull:
      return true;
    case Kind::kBanded:
      return std::abs(i - j) < bandwidth_;
    case Kind::kExplicit:
      return !std::binary_search(zeros_.begin(), zeros_.end(), std::make_pair(i, j));
  }
  return true;
}

std::vector<std::pair<int, int>> SparsityPattern::free_entries(int n) const {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      if (is_free(i, j)) out.emplace_back(i, j);
    }
  }
  return out;
}

Matrix SparsityPattern::project(const Matrix& a) const {
  Matrix out = a;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (!is_free(static_cast<int>(i), static_cast<int>(j))) out(i, j) = 0.0;
    }
  }
  return out;
}

PrecisionFitProblem PrecisionFitProblem::from_ensemble(const WeightedEnsemble& ens,
                                                       const SparsityPattern& pattern) {
  const Eigen::Index count = ens.size();
  PrecisionFitProblem problem;
  problem.deviations = ens.particles().rightCols(count).colwise() - ens.mode();
  problem.bounds = -2.0 * ens.weights().tail(count).array().log();
  problem.pattern = pattern;
  return problem;
}

namespace {

// Newton solver for the barrier problem in the free entries z of Λ.
class BarrierSolver {
 public:
  BarrierSolver(const Matrix& deviations, const Vector& bounds, const SparsityPattern& pattern)
      : n_(static_cast<int>(deviations.rows())),
        dev_(deviations),
        bounds_(bounds),
        entries_(pattern.free_entries(n_)) {
    const auto k = static_cast<Eigen::Index>(entries_.size());
    // Row i of coeffs_ holds Tr(Cᵢ Eₖ), so that Tr(Cᵢ Λ) = coeffs_.row(i) · z.
    coeffs_.resize(dev_.cols(), k);
    for (Eigen::Index c = 0; c < k; ++c) {
      const auto [a, b] = entries_[static_cast<std::size_t>(c)];
      const double factor = a == b ? 1.0 : 2.0;
      coeffs_.col(c) = factor * dev_.row(a).transpose().cwiseProduct(dev_.row(b).transpose());
    }
  }

  Eigen::Index variable_count() const { return static_cast<Eigen::Index>(entries_.size()); }

  Matrix assemble(const Vector& z) const {
    Matrix lambda = Matrix::Zero(n_, n_);
    for (std::size_t c = 0; c < entries_.size(); ++c) {
      const auto [a, b] = entries_[c];
      lambda(a, b) = z(static_cast<Eigen::Index>(c));
      lambda(b, a) = z(static_cast<Eigen::Index>(c));
    }
    return lambda;
  }

  Vector diagonal_start(double value) const {
    Vector z = Vector::Zero(variable_count());
    for (std::size_t c = 0; c < entries_.size(); ++c) {
      if (entries_[c].first == entries_[c].second) z(static_cast<Eigen::Index>(c)) = value;
    }
    return z;
  }

  Vector slacks(const Vector& z) const { return bounds_ - coeffs_ * z; }

  // Barrier objective (−t log|Λ| − Σ log sᵢ) / t; +∞ outside the domain. Dividing
  // by t keeps the values O(1) so that line-search comparisons stay resolvable.
  double objective(const Vector& z, double t) const {
    const Vector s = slacks(z);
    if ((s.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
    Eigen::LLT<Matrix> llt(assemble(z));
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const Matrix l = llt.matrixL();
    const Vector diag = l.diagonal();
    if ((diag.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
    const double log_det = 2.0 * diag.array().log().sum();
    return -log_det - s.array().log().sum() / t;
  }

  void derivatives(const Vector& z, double t, Vector& grad, Matrix& hess) const {
    const Matrix lambda = assemble(z);
    Eigen::LLT<Matrix> llt(lambda);
    const Matrix p = llt.solve(Matrix::Identity(n_, n_));
    const Vector s = slacks(z);
    const Vector inv_s = s.cwiseInverse();
    const auto k = variable_count();

    grad.resize(k);
    hess.resize(k, k);
    for (Eigen::Index c = 0; c < k; ++c) {
      const auto [a, b] = entries_[static_cast<std::size_t>(c)];
      grad(c) = -t * (a == b ? p(a, a) : 2.0 * p(a, b));
    }
    // Tr(P Eₖ P Eₗ) with Eₖ = γₖ (e_a e_bᵀ + e_b e_aᵀ), γ = ½ on the diagonal.
    for (Eigen::Index c = 0; c < k; ++c) {
      const auto [a, b] = entries_[static_cast<std::size_t>(c)];
      const double gk = a == b ? 0.5 : 1.0;
      for (Eigen::Index e = c; e < k; ++e) {
        const auto [cc, d] = entries_[static_cast<std::size_t>(e)];
        const double gl = cc == d ? 0.5 : 1.0;
        const double value = 2.0 * gk * gl * (p(b, cc) * p(a, d) + p(b, d) * p(a, cc));
        hess(c, e) = t * value;
        hess(e, c) = t * value;
      }
    }
    grad.noalias() += coeffs_.transpose() * inv_s;
    const Matrix weighted = inv_s.asDiagonal() * coeffs_;
    hess.noalias() += weighted.transpose() * weighted;
  }

 private:
  int n_;
  const Matrix& dev_;
  const Vector& bounds_;
  std::vector<std::pair<int, int>> entries_;
  Matrix coeffs_;
};

void check_problem(const PrecisionFitProblem& problem) {
  const Eigen::Index n = problem.dimension();
  const Eigen::Index count = problem.constraint_count();
  if (problem.bounds.size() != count) {
    throw DimensionMismatch("one bound is required per deviation");
  }
  if (n == 0) throw InvalidArgument("dimension must be positive");
  for (auto [i, j] : problem.pattern.zeros()) {
    if (i >= n || j >= n) throw InvalidArgument("zero-set index out of range");
  }
  if (count == 0) throw UnboundedProblem("no constraints: the ensemble has no non-mode particle");
  if (!problem.deviations.allFinite()) throw InvalidArgument("particles must be finite");
  if ((problem.bounds.array() <= 0.0).any() || !problem.bounds.allFinite()) {
    throw InvalidArgument("bounds −2 log wᵢ must be positive and finite");
  }
  // A coordinate untouched by every deviation leaves Λ_jj unconstrained.
  for (Eigen::Index j = 0; j < n; ++j) {
    if (problem.deviations.row(j).cwiseAbs().maxCoeff() == 0.0) {
      throw UnboundedProblem("component " + std::to_string(j) +
                             " does not vary across the ensemble");
    }
  }
  if (problem.pattern.kind() == SparsityPattern::Kind::kFull) {
    Eigen::JacobiSVD<Matrix> svd(problem.deviations);
    const Vector& sv = svd.singularValues();
    if (sv.size() < n || sv(n - 1) <= 1e-12 * sv(0)) {
      throw UnboundedProblem("deviations from the mode do not span the state space");
    }
  }
}

}  // namespace

FitResult solve_precision_fit(const PrecisionFitProblem& problem, const SolverOptions& options) {
  check_problem(problem);
  const Eigen::Index n = problem.dimension();
  const Eigen::Index count = problem.constraint_count();

  // Diagonal rescaling preserves any sparsity pattern: Λ' = S Λ S, d' = S⁻¹ d.
  const Vector scale =
      (problem.deviations.array().square().rowwise().sum() / static_cast<double>(count)).sqrt();
  const Matrix scaled = scale.cwiseInverse().asDiagonal() * problem.deviations;

  BarrierSolver solver(scaled, problem.bounds, problem.pattern);

  double c = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < count; ++i) {
    const double norm2 = scaled.col(i).squaredNorm();
    if (norm2 > 0.0) c = std::min(c, problem.bounds(i) / norm2);
  }
  c *= 0.5;
  Vector z = solver.diagonal_start(c / static_cast<double>(n));
  const double start_norm = c / static_cast<double>(n);

  constexpr double kArmijo = 0.25;
  constexpr double kShrink = 0.5;
  double t = 1.0;
  int iterations = 0;
  Vector grad;
  Matrix hess;
  for (;;) {
    int stage_iterations = 0;
    double value = solver.objective(z, t);
    for (;;) {
      if (stage_iterations >= options.max_newton_per_stage) {
        throw MaxIterations("Newton centering did not converge at barrier parameter " +
                            std::to_string(t));
      }
      solver.derivatives(z, t, grad, hess);
      Eigen::LLT<Matrix> llt(hess);
      Vector step;
      if (llt.info() == Eigen::Success) {
        step = -llt.solve(grad);
      } else {
        step = -hess.ldlt().solve(grad);
      }
      // Newton decrement of the unscaled barrier objective.
      const double decrement2 = -grad.dot(step);
      if (!std::isfinite(decrement2)) {
        throw UnboundedProblem("barrier iterates diverged");
      }
      if (decrement2 / 2.0 <= options.newton_tol) break;

      double alpha = 1.0;
      const double slope = grad.dot(step) / t;
      double trial = solver.objective(z + alpha * step, t);
      while (trial > value + kArmijo * alpha * slope && alpha > 1e-18) {
        alpha *= kShrink;
        trial = solver.objective(z + alpha * step, t);
      }
      ++stage_iterations;
      ++iterations;
      if (!(trial < value)) break;  // no further progress representable in double precision
      z += alpha * step;
      value = trial;
      if (z.cwiseAbs().maxCoeff() > options.divergence_factor * start_norm) {
        throw UnboundedProblem("log-determinant diverges: the fit problem is unbounded");
      }
    }
    if (static_cast<double>(count) / t < options.gap_tol) break;
    t *= options.barrier_growth;
  }

  // An unbounded direction drives the rescaled precision towards singular
  // conditioning long before its entries overflow.
  const Eigen::SelfAdjointEigenSolver<Matrix> spectrum(solver.assemble(z), Eigen::EigenvaluesOnly);
  const Vector& eig = spectrum.eigenvalues();
  if (!(eig(0) > 0.0) || eig(eig.size() - 1) > options.max_condition * eig(0)) {
    throw UnboundedProblem("log-determinant diverges: the fit problem is unbounded");
  }

  FitResult result;
  const Matrix inv_scale = scale.cwiseInverse().asDiagonal();
  result.precision = symmetrize(inv_scale * solver.assemble(z) * inv_scale);
  result.precision = problem.pattern.project(result.precision);
  result.slacks.resize(count);
  for (Eigen::Index i = 0; i < count; ++i) {
    const auto d = problem.deviations.col(i);
    result.slacks(i) = problem.bounds(i) - d.dot(result.precision * d);
  }
  result.iterations = iterations;
  result.barrier_final = t;
  return result;
}

FitResult fit_precision(const WeightedEnsemble& ens, const SparsityPattern& pattern,
                        const SolverOptions& options) {
  auto problem = PrecisionFitProblem::from_ensemble(ens, pattern);
  if (ens.dim() != 1) return solve_precision_fit(problem, options);

  check_problem(problem);
  FitResult result;
  result.precision = Matrix::Constant(1, 1, fit_precision_1d(ens));
  result.slacks = problem.bounds - problem.deviations.row(0).transpose().cwiseAbs2() *
                                       result.precision(0, 0);
  return result;
}

double fit_precision_1d(const WeightedEnsemble& ens) {
  if (ens.dim() != 1) throw DimensionMismatch("fit_precision_1d requires a one-dimensional ensemble");
  if (ens.size() < 1) throw UnboundedProblem("no constraints: the ensemble has no non-mode particle");
  const double mode = ens.particles()(0, 0);
  double precision = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 1; i <= ens.size(); ++i) {
    const double d = ens.particles()(0, i) - mode;
    if (d == 0.0) continue;
    precision = std::min(precision, -2.0 * std::log(ens.weights()(i)) / (d * d));
  }
  if (std::isinf(precision)) throw UnboundedProblem("every particle sits at the mode");
  return precision;
}

GaussianPossibility gaussian_from_ensemble(const WeightedEnsemble& ens,
                                           const SparsityPattern& pattern,
                                           const SolverOptions& options) {
  const FitResult fit = fit_precision(ens, pattern, options);
  return GaussianPossibility::from_precision(ens.mode(), fit.precision);
}

Vector nongaussianity_gaps(const WeightedEnsemble& ens, const FitResult& fit) {
  if (fit.precision.rows() != ens.dim()) throw DimensionMismatch("fit does not match ensemble");
  const Eigen::Index count = ens.size();
  Vector gaps(count);
  const Vector mode = ens.mode();
  for (Eigen::Index i = 0; i < count; ++i) {
    const Vector d = ens.particles().col(i + 1) - mode;
    gaps(i) = -d.dot(fit.precision * d) - 2.0 * std::log(ens.weights()(i + 1));
  }
  return gaps;
}

double feasibility_margin(const WeightedEnsemble& ens, const Matrix& precision) {
  const auto g = GaussianPossibility::from_precision(ens.mode(), precision);
  double margin = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 1; i <= ens.size(); ++i) {
    margin = std::min(margin, eval(g, ens.particles().col(i)) - ens.weights()(i));
  }
  return margin;
}

}  // namespace penkf
