#include "penkf/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "penkf/errors.hpp"

namespace penkf {

double rmse(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionMismatch("rmse: vectors differ in length");
  if (a.size() == 0) return 0.0;
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

double rmse(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch("rmse: matrices differ in shape");
  }
  if (a.size() == 0) return 0.0;
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

double mahalanobis(const Vector& x, const Vector& mu, const Matrix& sigma) {
  if (x.size() != mu.size() || sigma.rows() != x.size()) {
    throw DimensionMismatch("mahalanobis: dimension mismatch");
  }
  const Matrix l = cholesky_lower(sigma, "covariance");
  const Vector z = l.triangularView<Eigen::Lower>().solve(x - mu);
  return z.norm();
}

double log_det(const Matrix& sigma) {
  const Matrix l = cholesky_lower(sigma, "covariance");
  return 2.0 * l.diagonal().array().log().sum();
}

double percentile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw InvalidArgument("percentile of empty data");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0 || sorted[lo] == sorted[hi]) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<SummaryRow> aggregate(const std::vector<MetricSeries>& series) {
  if (series.empty()) throw InvalidArgument("aggregate needs at least one series");
  const auto& first = series.front();
  std::size_t steps = first.values.size();
  for (const auto& s : series) {
    if (s.algorithm != first.algorithm || s.metric != first.metric ||
        s.config_hash != first.config_hash) {
      throw InvalidArgument("aggregate: series must share algorithm, metric and configuration");
    }
    steps = std::min(steps, s.values.size());
  }
  std::vector<SummaryRow> out;
  out.reserve(steps);
  std::vector<double> column(series.size());
  for (std::size_t k = 0; k < steps; ++k) {
    double sum = 0.0;
    for (std::size_t r = 0; r < series.size(); ++r) {
      column[r] = series[r].values[k];
      sum += column[r];
    }
    std::sort(column.begin(), column.end());
    SummaryRow row;
    row.step = static_cast<int>(k) + 1;
    row.mean = sum / static_cast<double>(series.size());
    row.median = percentile_sorted(column, 0.5);
    row.q25 = percentile_sorted(column, 0.25);
    row.q75 = percentile_sorted(column, 0.75);
    out.push_back(row);
  }
  return out;
}

}  // namespace penkf
