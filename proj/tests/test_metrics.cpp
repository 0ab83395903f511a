#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "penkf/errors.hpp"
#include "penkf/metrics.hpp"
#include "test_support.hpp"

namespace penkf {
namespace {

TEST(Rmse, Examples) {
  EXPECT_EQ(rmse(Vector(Vector::Ones(3)), Vector(Vector::Ones(3))), 0.0);
  EXPECT_NEAR(rmse(Vector(Vector::Zero(2)), Vector((Vector(2) << 3, 4).finished())), std::sqrt(12.5), 1e-15);
  EXPECT_THROW(rmse(Vector(Vector::Zero(2)), Vector(Vector::Zero(3))), DimensionMismatch);
}

TEST(Rmse, PermutationAndShiftInvariant) {
  testing::Gen gen(51);
  const Vector a = gen.vector(6);
  const Vector b = gen.vector(6);
  const Vector rev_a = a.reverse();
  const Vector rev_b = b.reverse();
  EXPECT_DOUBLE_EQ(rmse(a, b), rmse(rev_a, rev_b));
  const Vector shift = Vector::Constant(6, 3.5);
  EXPECT_NEAR(rmse(Vector(a + shift), Vector(b + shift)), rmse(a, b), 1e-14);
}

TEST(Rmse, MatrixElementwise) {
  Matrix a = Matrix::Zero(2, 2);
  Matrix b = Matrix::Zero(2, 2);
  b(0, 1) = 2.0;
  EXPECT_DOUBLE_EQ(rmse(a, b), 1.0);
}

TEST(Mahalanobis, Examples) {
  testing::Gen gen(52);
  const Vector x = gen.vector(3);
  EXPECT_EQ(mahalanobis(x, x, gen.spd(3)), 0.0);
  const Vector y = gen.vector(3);
  EXPECT_NEAR(mahalanobis(x, y, Matrix::Identity(3, 3)), (x - y).norm(), 1e-14);
  EXPECT_DOUBLE_EQ(mahalanobis(Vector::Constant(1, 3), Vector::Constant(1, 1), Matrix::Constant(1, 1, 4)),
                   1.0);
  EXPECT_THROW(mahalanobis(x, y, -Matrix::Identity(3, 3)), NotPositiveDefinite);
}

TEST(Mahalanobis, ShiftInvariant) {
  testing::Gen gen(53);
  const Vector x = gen.vector(4);
  const Vector mu = gen.vector(4);
  const Matrix s = gen.spd(4);
  const Vector shift = gen.vector(4, 10.0);
  EXPECT_NEAR(mahalanobis(x + shift, mu + shift, s), mahalanobis(x, mu, s), 1e-12);
}

TEST(LogDet, Examples) {
  EXPECT_EQ(log_det(Matrix::Identity(3, 3)), 0.0);
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 2, 8;
  EXPECT_NEAR(log_det(d), std::log(16.0), 1e-15);
  testing::Gen gen(54);
  for (int n = 1; n <= 8; ++n) {
    const Matrix s = gen.spd(n);
    EXPECT_NEAR(log_det(s), std::log(s.determinant()), 1e-9);
    EXPECT_NEAR(log_det(3.0 * s), log_det(s) + n * std::log(3.0), 1e-12);
  }
}

MetricSeries series(std::vector<double> values, int repeat = 0) {
  return MetricSeries{"penkf", "rmse_truth", repeat, "h", std::move(values), {}};
}

TEST(Aggregate, SingleRepeat) {
  const auto rows = aggregate({series({2.5, 3.0})});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].step, 1);
  EXPECT_EQ(rows[0].mean, 2.5);
  EXPECT_EQ(rows[0].median, 2.5);
  EXPECT_EQ(rows[0].q25, 2.5);
  EXPECT_EQ(rows[0].q75, 2.5);
}

TEST(Aggregate, LinearInterpolationQuartiles) {
  const auto rows = aggregate({series({3}), series({1}), series({4}), series({2})});
  EXPECT_DOUBLE_EQ(rows[0].median, 2.5);
  EXPECT_DOUBLE_EQ(rows[0].q25, 1.75);
  EXPECT_DOUBLE_EQ(rows[0].q75, 3.25);
  EXPECT_DOUBLE_EQ(rows[0].mean, 2.5);
}

TEST(Aggregate, DivergenceMakesMeanInfiniteOnly) {
  const double inf = std::numeric_limits<double>::infinity();
  const auto rows = aggregate({series({1}), series({2}), series({inf}), series({3}), series({4})});
  EXPECT_TRUE(std::isinf(rows[0].mean));
  EXPECT_DOUBLE_EQ(rows[0].median, 3.0);
  EXPECT_TRUE(std::isfinite(rows[0].q25));
}

TEST(Aggregate, RejectsMixedOrEmpty) {
  auto other = series({1});
  other.metric = "logdet";
  EXPECT_THROW(aggregate({series({1}), other}), InvalidArgument);
  EXPECT_THROW(aggregate({}), InvalidArgument);
}

}  // namespace
}  // namespace penkf
