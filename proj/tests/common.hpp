// Shared seeds and small oracles for the test programs.
#ifndef CID_TESTS_COMMON_HPP
#define CID_TESTS_COMMON_HPP

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include <boost/math/tools/roots.hpp>

#include "cid/geometry.hpp"
#include "cid/seed.hpp"

namespace cidtest {

inline constexpr double kPi = std::numbers::pi;

inline cid::ReducedBackground desk(int m = 256, double length = 2.0 * kPi) {
  return cid::build_background({m, length});
}

/// tau = 1 + 2 cos, psi = 0.1 cos, pi = 0.01, s0 = 0.01, V = 0.1 + 0.05 x^2.
inline cid::SeedConfig benchmark_seed() {
  cid::SeedConfig c;
  c.tau = {1.0, {2.0}, {}};
  c.psi = {0.0, {0.1}, {}};
  c.pi = {0.01, {}, {}};
  c.sigma_amp = 0.01;
  c.potential = {{0.1, 0.0, 0.05}};
  return c;
}

/// tau = sqrt 3, psi = 0, pi = 1, s0 = 1/sqrt 6, V = 1: phi = 1, W = 0 solves exactly.
inline cid::SeedConfig constant_seed() {
  cid::SeedConfig c;
  c.tau = {std::sqrt(3.0), {}, {}};
  c.psi = {0.0, {}, {}};
  c.pi = {1.0, {}, {}};
  c.sigma_amp = 1.0 / std::sqrt(6.0);
  c.potential = {{1.0}};
  return c;
}

/// Constant tau with nonconstant psi and pi; decoupled only when psi' pi has no effect on W.
inline cid::SeedConfig cmc_seed(double tau = 1.2, double s0 = 0.05, double pi0 = 0.2, double v0 = 0.3) {
  cid::SeedConfig c;
  c.tau = {tau, {}, {}};
  c.psi = {0.0, {}, {}};
  c.pi = {pi0, {}, {}};
  c.sigma_amp = s0;
  c.potential = {{v0}};
  return c;
}

/// tau = 0, V = 0.75, A = 2: the lambda-family folds at lambda^2 = 4 / (3 sqrt 3 * 1.5).
inline cid::SeedConfig fold_seed() {
  cid::SeedConfig c;
  c.tau = {0.0, {}, {}};
  c.psi = {0.0, {}, {}};
  c.pi = {1.0, {}, {}};
  c.sigma_amp = 1.0 / std::sqrt(6.0);
  c.potential = {{0.75}};
  return c;
}

/// Largest root in (lo, hi) of g by TOMS 748; g must change sign on the bracket.
inline double root(const std::function<double(double)>& g, double lo, double hi) {
  boost::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(g, lo, hi, boost::math::tools::eps_tolerance<double>(52), iters);
  return 0.5 * (r.first + r.second);
}

/// Positive root of R x - B x^5 - A x^-7 = 0 on the branch where the linear term dominates,
/// i.e. the constant solution of the Lichnerowicz equation (2 x^8 - B x^12 - A = 0 for R = 2).
inline double constant_lichnerowicz_root(double r, double b, double a) {
  auto g = [=](double x) { return r * std::pow(x, 8) - b * std::pow(x, 12) - a; };
  double hi = 1.0;
  if (b > 0.0) {
    hi = std::pow(2.0 * r / (3.0 * b), 0.25);  // maximiser of g
  } else {
    while (g(hi) <= 0.0) hi *= 2.0;
  }
  return root(g, 0.0, hi);
}

inline cid::Vector random_positive(const cid::ReducedBackground& bg, std::mt19937_64& rng, double base, double amp,
                                   int modes = 4) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  cid::Vector v = bg.constant(base);
  for (int k = 1; k <= modes; ++k) {
    const double a = amp * u(rng) / k;
    const double b = amp * u(rng) / k;
    v += bg.sample([=](double t) { return a * std::cos(k * t) + b * std::sin(k * t); });
  }
  return v;
}

}  // namespace cidtest

#endif  // CID_TESTS_COMMON_HPP
