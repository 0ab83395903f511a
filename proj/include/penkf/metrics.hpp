#pragma once

#include <string>
#include <vector>

#include "penkf/linalg.hpp"

namespace penkf {

/// Values with absolute value above this are treated as a diverged filter.
inline constexpr double kDivergenceThreshold = 1e12;

double rmse(const Vector& a, const Vector& b);
/// Elementwise RMSE over the flattened matrices.
double rmse(const Matrix& a, const Matrix& b);

/// √((x−μ)ᵀ Σ⁻¹ (x−μ)) via a Cholesky solve.
double mahalanobis(const Vector& x, const Vector& mu, const Matrix& sigma);

/// log|Σ| = 2 Σ log diag(chol(Σ)).
double log_det(const Matrix& sigma);

/// Per-step metric values for one (algorithm, metric, repeat) triple.
struct MetricSeries {
  std::string algorithm;
  std::string metric;
  int repeat = 0;
  std::string config_hash;
  std::vector<double> values;
  std::vector<bool> diverged;
};

struct SummaryRow {
  int step = 0;  ///< 1-based
  double mean = 0;
  double median = 0;
  double q25 = 0;
  double q75 = 0;
};

/// Linear-interpolation percentile of sorted data, p in [0, 1].
double percentile_sorted(const std::vector<double>& sorted, double p);

/// Per-step mean, median and quartiles across repeats.
std::vector<SummaryRow> aggregate(const std::vector<MetricSeries>& series);

}  // namespace penkf
