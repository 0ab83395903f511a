#include "penkf/random.hpp"

namespace penkf {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t repeat, StreamPurpose purpose,
                          std::uint64_t salt) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ repeat);
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  return splitmix64(h ^ salt);
}

Vector Rng::standard_normal(Eigen::Index n) {
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = normal_(engine_);
  return z;
}

Vector Rng::gaussian_from_factor(const Vector& mean, const Matrix& lower) {
  return mean + lower * standard_normal(mean.size());
}

Vector Rng::gaussian(const Vector& mean, const Matrix& cov) {
  return gaussian_from_factor(mean, cholesky_lower_psd(cov));
}

double Rng::chi_squared(double dof) {
  std::chi_squared_distribution<double> dist(dof);
  return dist(engine_);
}

}  // namespace penkf
