#pragma once

#include <cstdint>
#include <random>

#include "penkf/linalg.hpp"

namespace penkf {

/// Purposes for independent random streams within one repeat. Adding a new
/// purpose never perturbs the streams of existing ones.
enum class StreamPurpose : std::uint64_t {
  kTruth = 1,
  kPenkfInit = 2,
  kEnsembleInit = 3,
  kEnsembleNoise = 4,
  kObservationPerturbation = 5,
  kCovarianceDraw = 6,
  kSampleDraw = 7,
};

std::uint64_t splitmix64(std::uint64_t x);

/// Seed for the stream identified by (master, repeat, purpose, salt).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t repeat, StreamPurpose purpose,
                          std::uint64_t salt = 0);

/// 64-bit Mersenne twister with standard-normal helpers. Each filter run and
/// each simulation owns its own instance.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t master, std::uint64_t repeat, StreamPurpose purpose, std::uint64_t salt = 0)
      : engine_(derive_seed(master, repeat, purpose, salt)) {}

  double normal() { return normal_(engine_); }
  Vector standard_normal(Eigen::Index n);
  /// Draw from N(mean, L Lᵀ) given the lower factor L.
  Vector gaussian_from_factor(const Vector& mean, const Matrix& lower);
  /// Draw from N(mean, cov); cov may be positive semidefinite.
  Vector gaussian(const Vector& mean, const Matrix& cov);
  double chi_squared(double dof);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace penkf
