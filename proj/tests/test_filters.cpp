#include <gtest/gtest.h>

#include <cmath>

#include "penkf/errors.hpp"
#include "penkf/filters.hpp"
#include "penkf/models.hpp"
#include "test_support.hpp"

namespace penkf {
namespace {

using testing::Gen;
using testing::rel_error;

Matrix m1(double v) { return Matrix::Constant(1, 1, v); }
Vector v1(double v) { return Vector::Constant(1, v); }

Transition identity_map() {
  return [](const Vector& x) -> Vector { return x; };
}

TEST(KalmanFilter, PredictExamples) {
  const auto same = kf_predict({v1(1), m1(2)}, m1(1), m1(0));
  EXPECT_EQ(same.mean(0), 1.0);
  EXPECT_EQ(same.covariance(0, 0), 2.0);
  const auto s = kf_predict({v1(1), m1(2)}, m1(3), m1(1));
  EXPECT_DOUBLE_EQ(s.mean(0), 3.0);
  EXPECT_DOUBLE_EQ(s.covariance(0, 0), 19.0);

  const double a = 0.3;
  Matrix r(2, 2);
  r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  const auto rot = kf_predict({Vector::Zero(2), Matrix::Identity(2, 2)}, r, Matrix::Zero(2, 2));
  EXPECT_LT((rot.covariance - Matrix::Identity(2, 2)).norm(), 1e-14);
}

TEST(KalmanFilter, UpdateExamples) {
  const auto s = kf_update({v1(0), m1(1)}, v1(2), m1(1), m1(1));
  EXPECT_DOUBLE_EQ(s.mean(0), 1.0);
  EXPECT_DOUBLE_EQ(s.covariance(0, 0), 0.5);

  Gen gen(31);
  const KalmanState prior{gen.vector(3), gen.spd(3)};
  const Vector y = gen.vector(3);
  const auto vague = kf_update(prior, y, Matrix::Identity(3, 3), 1e12 * Matrix::Identity(3, 3));
  EXPECT_LT((vague.mean - prior.mean).norm(), 1e-3);
  EXPECT_LT((vague.covariance - prior.covariance).norm(), 1e-3);
  const auto sharp = kf_update(prior, y, Matrix::Identity(3, 3), 1e-12 * Matrix::Identity(3, 3));
  EXPECT_LT((sharp.mean - y).norm(), 1e-9);
}

TEST(EnsembleFilter, PredictDivisorAndIdentity) {
  Rng rng(1);
  ProbEnsemble ens{(Matrix(1, 2) << 0, 2).finished()};
  const auto pred = enkf_predict(ens, identity_map(), m1(0), rng);
  EXPECT_EQ(pred.ensemble.members, ens.members);
  EXPECT_DOUBLE_EQ(pred.mean(0), 1.0);
  EXPECT_DOUBLE_EQ(pred.covariance(0, 0), 2.0);
}

TEST(EnsembleFilter, PredictDeterministicGivenSeed) {
  Gen gen(32);
  const ProbEnsemble ens{gen.matrix(3, 6)};
  const Matrix u = gen.spd(3);
  Rng a(99), b(99);
  const auto pa = enkf_predict(ens, identity_map(), u, a);
  const auto pb = enkf_predict(ens, identity_map(), u, b);
  EXPECT_EQ(pa.ensemble.members, pb.ensemble.members);
  EXPECT_NE(pa.ensemble.members, ens.members);
}

TEST(Gains, ScalarExampleAndNoiselessLimit) {
  const auto g = compute_gains(m1(1), m1(1), m1(1));
  EXPECT_DOUBLE_EQ(g.innovation_cov(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(g.standard_gain(0, 0), 0.5);
  EXPECT_NEAR(g.adjusted_gain(0, 0), 1.0 / (2.0 + std::sqrt(2.0)), 1e-15);

  Gen gen(33);
  const auto exact = compute_gains(gen.spd(3), Matrix::Identity(3, 3), Matrix::Zero(3, 3));
  EXPECT_LT((exact.standard_gain - Matrix::Identity(3, 3)).norm(), 1e-12);
  EXPECT_LT((exact.adjusted_gain - Matrix::Identity(3, 3)).norm(), 1e-12);
}

TEST(Gains, SquareRootIdentity) {
  Gen gen(34);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = gen.integer(1, 8);
    const int m = gen.integer(1, n);
    const Matrix cov = gen.spd(n);
    const Matrix h = gen.matrix(m, n);
    const Matrix v = gen.spd(m, 0.05, 1.0);
    const auto g = compute_gains(cov, h, v);
    const Matrix i = Matrix::Identity(n, n);
    const Matrix lhs = (i - g.adjusted_gain * h) * cov * (i - g.adjusted_gain * h).transpose();
    EXPECT_LT((lhs - (i - g.standard_gain * h) * cov).norm(), 1e-10 * cov.norm());
  }
}

TEST(Gains, SingularInnovationFails) {
  EXPECT_THROW(compute_gains(m1(0), m1(1), m1(0)), NotPositiveDefinite);
}

TEST(SqrtEnKF, ScalarExample) {
  ProbEnsemble ens{(Matrix(1, 1) << 1).finished()};
  const auto out = sqrt_enkf_update(ens, v1(0), m1(1), v1(2), m1(1), m1(1));
  EXPECT_NEAR(out.members(0, 0), 1.0 + 1.0 / std::sqrt(2.0), 1e-12);
}

TEST(SqrtEnKF, ZeroInnovationKeepsMean) {
  Gen gen(35);
  const ProbEnsemble ens{gen.matrix(3, 7)};
  const auto moments = ensemble_moments(ens);
  const Matrix h = gen.matrix(2, 3);
  const Matrix v = gen.spd(2);
  const auto out = sqrt_enkf_update(ens, moments.mean, moments.covariance, h * moments.mean, h, v);
  EXPECT_LT((ensemble_moments(out).mean - moments.mean).norm(), 1e-12);
}

TEST(SqrtEnKF, UpdatedSampleCovarianceIsExact) {
  Gen gen(36);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = gen.integer(1, 8);
    const int m = gen.integer(1, n);
    const ProbEnsemble ens{gen.matrix(n, n + gen.integer(2, 10))};
    const auto moments = ensemble_moments(ens);
    const Matrix h = gen.matrix(m, n);
    const Matrix v = gen.spd(m, 0.1, 1.0);
    const auto out = sqrt_enkf_update(ens, moments.mean, moments.covariance, gen.vector(m), h, v);
    const auto g = compute_gains(moments.covariance, h, v);
    const Matrix target = (Matrix::Identity(n, n) - g.standard_gain * h) * moments.covariance;
    EXPECT_LT((ensemble_moments(out).covariance - target).norm(), 1e-10);
  }
}

TEST(StochasticEnKF, NoiselessIsDeterministic) {
  Gen gen(37);
  const ProbEnsemble ens{gen.matrix(2, 5)};
  const auto moments = ensemble_moments(ens);
  const Matrix h = Matrix::Identity(1, 2);
  const Vector y = v1(0.7);
  Rng rng(3);
  const auto out = stenkf_update(ens, moments.mean, moments.covariance, y, h, m1(0), rng);
  const Matrix k = compute_gains(moments.covariance, h, m1(0)).standard_gain;
  for (int i = 0; i < 5; ++i) {
    const Vector expected = ens.members.col(i) + k * (y - h * ens.members.col(i));
    EXPECT_LT((out.members.col(i) - expected).norm(), 1e-12);
  }
}

TEST(StochasticEnKF, PerturbationAverageMatchesKalmanMean) {
  Gen gen(38);
  const int n = 2;
  const ProbEnsemble ens{gen.matrix(n, 4)};
  const auto moments = ensemble_moments(ens);
  const Matrix h = gen.matrix(1, n);
  const Matrix v = m1(0.5);
  const Vector y = v1(1.3);
  const auto g = compute_gains(moments.covariance, h, v);
  const Vector kalman = moments.mean + g.standard_gain * (y - h * moments.mean);

  Rng rng(4);
  const int draws = 100000;
  Vector sum = Vector::Zero(n);
  Vector sum_sq = Vector::Zero(n);
  for (int d = 0; d < draws; ++d) {
    const Vector mean = ensemble_moments(
        stenkf_update(ens, moments.mean, moments.covariance, y, h, v, rng)).mean;
    sum += mean;
    sum_sq += mean.cwiseAbs2();
  }
  const Vector avg = sum / draws;
  const Vector se = ((sum_sq / draws - avg.cwiseAbs2()) / draws).cwiseSqrt();
  for (int i = 0; i < n; ++i) EXPECT_LE(std::abs(avg(i) - kalman(i)), 3.0 * se(i));
}

TEST(StochasticEnKF, ReproducibleGivenSeed) {
  Gen gen(39);
  const ProbEnsemble ens{gen.matrix(2, 5)};
  const auto moments = ensemble_moments(ens);
  Rng a(8), b(8);
  const Matrix h = Matrix::Identity(2, 2);
  const Matrix v = 0.1 * Matrix::Identity(2, 2);
  EXPECT_EQ(stenkf_update(ens, moments.mean, moments.covariance, Vector::Ones(2), h, v, a).members,
            stenkf_update(ens, moments.mean, moments.covariance, Vector::Ones(2), h, v, b).members);
}

TEST(Unscented, LambdaAndSigmaPoints) {
  const UKFConfig cfg;
  EXPECT_DOUBLE_EQ(cfg.lambda(8), 0.625);
  Gen gen(40);
  const Matrix sp = ukf_sigma_points(gen.vector(4), gen.spd(4), cfg);
  EXPECT_EQ(sp.cols(), 9);
  UKFConfig bad;
  bad.alpha = 0.01;
  bad.kappa = -3.0;
  EXPECT_THROW(ukf_sigma_points(Vector::Zero(2), Matrix::Identity(2, 2), bad), InvalidArgument);
}

TEST(Unscented, ExactForLinearDynamics) {
  LinearModelConfig lc;
  const auto model = make_linear_model(lc);
  Rng rng(5);
  const auto traj = simulate_trajectory(model, 30, rng);
  KalmanState kf{model.init_mean, model.init_cov};
  KalmanState ukf = kf;
  for (int k = 0; k < 30; ++k) {
    const Vector& y = traj.observations[static_cast<std::size_t>(k)];
    kf = kf_update(kf_predict(kf, *model.transition_matrix, model.u), y, model.h, model.v);
    ukf = ukf_step(ukf, model.transition, model.u, y, model.h, model.v, UKFConfig{});
    EXPECT_LT((kf.mean - ukf.mean).norm(), 1e-8);
    EXPECT_LT((kf.covariance - ukf.covariance).norm(), 1e-8);
  }
}

TEST(PenkfInit, RandomPriorHasModeAndWeights) {
  Gen gen(41);
  const auto prior = GaussianPossibility::from_covariance(gen.vector(3), gen.spd(3));
  Rng rng(6);
  const auto ens = penkf_init(prior, 6, InitScheme::kRandomPrior, UKFConfig{}, rng);
  EXPECT_EQ(ens.size(), 6);
  EXPECT_EQ(ens.mode(), prior.mean());
  EXPECT_EQ(ens.weights()(0), 1.0);
  for (Eigen::Index i = 1; i <= 6; ++i) {
    EXPECT_GT(ens.weights()(i), 0.0);
    EXPECT_LT(ens.weights()(i), 1.0);
    EXPECT_DOUBLE_EQ(ens.weights()(i), eval(prior, ens.particles().col(i)));
  }
}

TEST(PenkfInit, UkfFullScalarExample) {
  const auto prior = GaussianPossibility::from_covariance(v1(0), m1(1));
  Rng rng(7);
  const UKFConfig cfg{0.25, 25.0, 2.0};  // λ = 0.625 at n = 1
  ASSERT_NEAR(cfg.lambda(1), 0.625, 1e-12);
  const auto ens = penkf_init(prior, 2, InitScheme::kUkfFull, cfg, rng);
  EXPECT_NEAR(ens.particles()(0, 1), std::sqrt(1.625), 1e-12);
  EXPECT_NEAR(ens.particles()(0, 2), -std::sqrt(1.625), 1e-12);
  EXPECT_NEAR(ens.weights()(1), std::exp(-1.625 / 2.0), 1e-12);
  EXPECT_NEAR(ens.weights()(2), std::exp(-1.625 / 2.0), 1e-12);
}

TEST(PenkfInit, OneSidedBranches) {
  Gen gen(42);
  const auto prior = GaussianPossibility::from_covariance(gen.vector(3), gen.spd(3));
  Rng rng(8);
  const auto plus = penkf_init(prior, 3, InitScheme::kUkfPlus, UKFConfig{}, rng);
  const auto minus = penkf_init(prior, 3, InitScheme::kUkfMinus, UKFConfig{}, rng);
  const Matrix dp = plus.particles().rightCols(3).colwise() - prior.mean();
  const Matrix dm = minus.particles().rightCols(3).colwise() - prior.mean();
  EXPECT_LT((dp + dm).norm(), 1e-12);
  EXPECT_TRUE(dp.isLowerTriangular(1e-12));
  EXPECT_GT(dp.diagonal().minCoeff(), 0.0);
}

TEST(PenkfInit, SchemeSizeMismatch) {
  const auto prior = GaussianPossibility::from_covariance(Vector::Zero(2), Matrix::Identity(2, 2));
  Rng rng(9);
  EXPECT_THROW(penkf_init(prior, 3, InitScheme::kUkfFull, UKFConfig{}, rng), InvalidArgument);
  EXPECT_THROW(penkf_init(prior, 4, InitScheme::kUkfPlus, UKFConfig{}, rng), InvalidArgument);
}

TEST(PenkfPredict, ScalarExample) {
  Matrix p(1, 2);
  p << 0, 1;
  const WeightedEnsemble ens(p, (Vector(2) << 1, std::exp(-0.5)).finished());
  const auto pred = penkf_predict(ens, identity_map(), m1(3), SparsityPattern::full());
  EXPECT_NEAR(pred.ensemble.particles()(0, 1), 2.0, 1e-8);
  EXPECT_EQ(pred.ensemble.particles()(0, 0), 0.0);
  EXPECT_NEAR(pred.predicted.covariance()(0, 0), 4.0, 1e-8);
  EXPECT_NEAR(fit_precision_1d(pred.ensemble), 0.25, 1e-8);
  EXPECT_EQ(pred.ensemble.weights(), ens.weights());
}

TEST(PenkfPredict, ZeroNoiseKeepsPropagatedEnsemble) {
  Gen gen(43);
  const auto ens = gen.arbitrary_ensemble(3, 6);
  const Matrix f = gen.well_conditioned(3);
  const auto pred = penkf_predict(ens, linear_transition(f), Matrix::Zero(3, 3), SparsityPattern::full());
  EXPECT_LT((pred.ensemble.particles() - f * ens.particles()).norm(), 1e-8);
  EXPECT_LT(rel_error(pred.predicted.precision(), pred.fit.precision), 1e-8);
  EXPECT_EQ(pred.ensemble.mode(), pred.predicted.mean());
}

TEST(PenkfPredict, TransportedEnsembleRefitsToPredictedPrecision) {
  Gen gen(44);
  for (int n : {2, 4}) {
    for (int trial = 0; trial < 10; ++trial) {
      const auto ens = gen.arbitrary_ensemble(n, 2 * n);
      const Matrix f = gen.well_conditioned(n);
      const Matrix u = gen.spd(n, 0.01, 0.5);
      const auto pred = penkf_predict(ens, linear_transition(f), u, SparsityPattern::full());
      const Matrix refit = fit_precision(pred.ensemble, SparsityPattern::full()).precision;
      EXPECT_LT(rel_error(refit, pred.predicted.precision()), 1e-5);
      EXPECT_GE(pred.feasibility_margin, -1e-8);
    }
  }
}

TEST(PenkfUpdate, ScalarExample) {
  Matrix p(1, 2);
  p << 0, 1;
  const WeightedEnsemble ens(p, (Vector(2) << 1, std::exp(-0.5)).finished());
  const auto pred = GaussianPossibility::from_covariance(v1(0), m1(1));
  const auto upd = penkf_update(ens, pred, v1(2), m1(1), m1(1));
  EXPECT_DOUBLE_EQ(upd.posterior.mean()(0), 1.0);
  EXPECT_DOUBLE_EQ(upd.posterior.covariance()(0, 0), 0.5);
  EXPECT_NEAR(upd.ensemble.particles()(0, 1), 1.0 + 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_EQ(upd.ensemble.particles()(0, 0), upd.posterior.mean()(0));
}

TEST(PenkfUpdate, RefitMatchesKalmanPosterior) {
  Gen gen(45);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = gen.integer(2, 5);
    const int m = gen.integer(1, n);
    const auto ens = gen.arbitrary_ensemble(n, 2 * n);
    const auto pred = gaussian_from_ensemble(ens, SparsityPattern::full());
    const Matrix h = gen.matrix(m, n);
    const Matrix v = gen.spd(m, 0.1, 1.0);
    const Vector y = gen.vector(m);
    const auto upd = penkf_update(ens, pred, y, h, v);
    const auto kf = kf_update({pred.mean(), pred.covariance()}, y, h, v);
    EXPECT_LT((upd.posterior.mean() - kf.mean).norm(), 1e-10 * (1.0 + kf.mean.norm()));
    EXPECT_EQ(upd.ensemble.mode(), upd.posterior.mean());
    const auto refit = gaussian_from_ensemble(upd.ensemble, SparsityPattern::full());
    EXPECT_LT(rel_error(refit.covariance(), kf.covariance), 1e-5);
    EXPECT_EQ(upd.ensemble.weights(), ens.weights());
  }
}

TEST(PenkfUpdate, ZeroInnovationKeepsExpectedValue) {
  Gen gen(46);
  const auto ens = gen.arbitrary_ensemble(3, 6);
  const auto pred = gaussian_from_ensemble(ens, SparsityPattern::full());
  const Matrix h = gen.matrix(2, 3);
  const auto upd = penkf_update(ens, pred, h * pred.mean(), h, gen.spd(2));
  EXPECT_LT((upd.posterior.mean() - pred.mean()).norm(), 1e-12);
}

TEST(PenkfUpdateLinearised, LinearMapMatchesPlainUpdate) {
  Gen gen(47);
  const auto ens = gen.arbitrary_ensemble(3, 6);
  const auto pred = gaussian_from_ensemble(ens, SparsityPattern::full());
  const Matrix h = gen.matrix(2, 3);
  const Matrix v = gen.spd(2);
  const Vector y = gen.vector(2);
  const auto plain = penkf_update(ens, pred, y, h, v);
  const auto lin = penkf_update_linearised(
      ens, pred, y, [&](const Vector& x) -> Vector { return h * x; },
      [&](const Vector&) -> Matrix { return h; }, v);
  EXPECT_LT((plain.ensemble.particles() - lin.ensemble.particles()).norm(), 1e-12);
  EXPECT_LT((plain.posterior.covariance() - lin.posterior.covariance()).norm(), 1e-14);
}

TEST(PenkfUpdateLinearised, ScalarSquareObservation) {
  const auto square = [](const Vector& x) -> Vector { return x.cwiseAbs2(); };
  const auto jac = [](const Vector& x) -> Matrix { return m1(2.0 * x(0)); };
  Matrix p(1, 2);
  p << 1, 2;
  const WeightedEnsemble ens(p, (Vector(2) << 1, 0.5).finished());
  const auto same = penkf_update_linearised(ens, GaussianPossibility::from_covariance(v1(1), m1(1)),
                                            v1(1), square, jac, m1(1));
  EXPECT_DOUBLE_EQ(same.posterior.mean()(0), 1.0);

  Matrix q(1, 2);
  q << 2, 3;
  const WeightedEnsemble ens2(q, (Vector(2) << 1, 0.5).finished());
  const auto upd = penkf_update_linearised(ens2, GaussianPossibility::from_covariance(v1(2), m1(1)),
                                           v1(5), square, jac, m1(1));
  EXPECT_NEAR(upd.posterior.mean()(0), 2.0 + 4.0 / 17.0, 1e-12);
}

TEST(Penkf, TracksKalmanFilterOnLinearModel) {
  LinearModelConfig lc;
  lc.n = 4;
  lc.m = 2;
  const auto model = make_linear_model(lc);
  Rng truth(10);
  const auto traj = simulate_trajectory(model, 40, truth);
  const auto prior = GaussianPossibility::from_covariance(model.init_mean, model.init_cov);
  Rng init(11);
  auto ens = penkf_init(prior, 8, InitScheme::kRandomPrior, UKFConfig{}, init);
  const Vector initial_weights = ens.weights();

  // The fitted initial Gaussian plays the role of the KF prior.
  const auto start = gaussian_from_ensemble(ens, SparsityPattern::full());
  KalmanState kf{start.mean(), start.covariance()};
  for (int k = 0; k < 40; ++k) {
    const Vector& y = traj.observations[static_cast<std::size_t>(k)];
    kf = kf_update(kf_predict(kf, *model.transition_matrix, model.u), y, model.h, model.v);
    const auto pred = penkf_predict(ens, model.transition, model.u, SparsityPattern::full());
    const auto upd = penkf_update(pred.ensemble, pred.predicted, y, model.h, model.v);
    ens = upd.ensemble;
    EXPECT_LT((upd.posterior.mean() - kf.mean).norm(), 1e-5 * (1.0 + kf.mean.norm()));
    EXPECT_LT(rel_error(upd.posterior.covariance(), kf.covariance), 1e-5);
    EXPECT_EQ(ens.mode(), upd.posterior.mean());
  }
  EXPECT_EQ(ens.weights(), initial_weights);
}

TEST(Penkf, BandedPatternStaysFeasible) {
  LinearModelConfig lc;
  lc.n = 5;
  lc.m = 1;
  const auto model = make_linear_model(lc);
  Rng truth(12);
  const auto traj = simulate_trajectory(model, 20, truth);
  Rng init(13);
  auto ens = penkf_init(GaussianPossibility::from_covariance(model.init_mean, model.init_cov), 10,
                        InitScheme::kRandomPrior, UKFConfig{}, init);
  for (int k = 0; k < 20; ++k) {
    const auto pred = penkf_predict(ens, model.transition, model.u, SparsityPattern::banded(2));
    EXPECT_GE(pred.feasibility_margin, -1e-8);
    const auto upd = penkf_update(pred.ensemble, pred.predicted,
                                  traj.observations[static_cast<std::size_t>(k)], model.h, model.v);
    ens = upd.ensemble;
    const auto refit = fit_precision(ens, SparsityPattern::full());
    EXPECT_GE(feasibility_margin(ens, refit.precision), -1e-8);
  }
}

}  // namespace
}  // namespace penkf
