#ifndef CID_SEED_HPP
#define CID_SEED_HPP

#include <string>
#include <vector>

#include "cid/geometry.hpp"

namespace cid {

/// Polynomial potential V(x) = sum_k c_k x^k; c_0 acts as a cosmological constant.
struct Potential {
  std::vector<double> coeffs;

  double operator()(double x) const;
  double derivative(double x) const;
};

/// Fourier description of one even seed function: mean + sum_k cos_k cos(k omega theta).
/// Sine coefficients are accepted only so that they can be rejected.
struct FourierSpec {
  double mean = 0.0;
  std::vector<double> cos;
  std::vector<double> sin;
};

struct SeedConfig {
  FourierSpec tau;
  FourierSpec psi;
  FourierSpec pi;
  double sigma_amp = 0.0;
  Potential potential;
};

/// Seed data. sigma is the constant-amplitude TT tensor s0 (2 dtheta^2 - g_S2),
/// which is trace free and divergence free on the product metric.
struct SeedData {
  Field tau;
  Field psi;
  Field pi;
  double sigma_amp = 0.0;
  Potential potential;
};

/// Lichnerowicz coefficients R_psi = Scal - |dpsi|^2 and B = -(2/3) tau^2 + 2 V(psi).
struct LichCoefficients {
  Field rpsi;
  Field btaupsi;
  Field b_minus;
  Field b_plus;
  double sup_abs_b = 0.0;
};

struct ValidationReport {
  bool passed = false;
  bool coercive_by_positivity = false;
  bool coercive_by_eigenvalue = false;
  bool parity_ok = false;
  double min_rpsi = 0.0;
  double lambda_min_h = 0.0;
  std::vector<std::string> failures;
};

/// Samples a FourierSpec; throws PreconditionError("parity violation") for
/// sine terms and ("unresolved mode") for modes >= M/2.
Field sample_even(const ReducedBackground& bg, const FourierSpec& spec, const std::string& name);

SeedData build_seed(const ReducedBackground& bg, const SeedConfig& config);

LichCoefficients coefficients(const ReducedBackground& bg, const SeedData& seed);

/// Copy of `seed` with sigma and pi multiplied by `factor`.
SeedData scale_data(const SeedData& seed, double factor);

/// |sigma|^2 pointwise, 6 s0^2.
inline double sigma_norm_sq(double s0) { return 6.0 * s0 * s0; }

/// int (|sigma|^2 + pi^2) dmu.
double seed_source_integral(const ReducedBackground& bg, const SeedData& seed);

ValidationReport validate(const ReducedBackground& bg, const SeedData& seed, double parity_tol = 1e-12);

}  // namespace cid

#endif  // CID_SEED_HPP
