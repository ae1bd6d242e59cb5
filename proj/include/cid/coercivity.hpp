#ifndef CID_COERCIVITY_HPP
#define CID_COERCIVITY_HPP

#include <cstdint>
#include <string>

#include "cid/geometry.hpp"

namespace cid {

/// Coercivity data of the conformal operator. s_est and s_prime_est are
/// upper estimates of the best constants in ||u||_h^2 >= s ||u||_{L^6}^2
/// (resp. the k-norm analogue); anything derived from them is relative to
/// those estimates.
struct CoercivityEstimate {
  double lambda_min_h = 0.0;
  double s_est = 0.0;
  double s_prime_est = 0.0;
  double R0 = 0.0;
  Vector s_trial;          // minimiser achieving s_est
  int s_trial_start = -1;  // -1 is the constant trial, otherwise the random start index
};

struct QuotientOptions {
  int random_starts = 16;
  int max_iter = 400;
  double rel_tol = 1e-13;
  std::uint64_t rng_seed = 20240611;
  /// Restrict to zero-mean trial functions (the kernel of the gradient term).
  bool zero_mean = false;
  /// Include the constant function as a trial (ignored with zero_mean).
  bool constant_trial = true;
};

/// coeff * Laplacian + diag(rpsi).
struct QuadraticForm {
  double coeff = kConformalCoeff;
  Vector rpsi;
};

struct QuotientResult {
  double value = 0.0;
  Vector minimizer;
  int start = -1;
};

/// Minimises  w u^T A u / (int |u|^6 dmu)^(1/3)  over band-limited trial
/// functions (the Nyquist mode is projected out) by Sobolev-preconditioned
/// gradient descent with Armijo backtracking, from the constant trial plus
/// `random_starts` random smooth starts. `form` must be positive
/// semi-definite; with zero_mean it may have the constants in its kernel.
QuotientResult minimize_sobolev_quotient(const ReducedBackground& bg, const QuadraticForm& form,
                                         const QuotientOptions& options);

/// Value of the quotient above for one trial function.
double sobolev_quotient(const ReducedBackground& bg, const QuadraticForm& form, const Vector& u);

double lowest_eigenvalue(const Matrix& symmetric);

/// Radius of the ball on which the Hessian of the truncated functional stays
/// above half the h-norm: s^(1/2) (s / (2 (N-1) sup|B|))^(1/(N-2)).
/// Infinite when sup|B| = 0.
double ball_radius(double s, double sup_abs_b);

/// Sobolev-type constant of coeff * Laplacian + diag(rpsi).
QuotientResult estimate_sobolev_constant(const ReducedBackground& bg, double coeff, const Vector& rpsi,
                                         const QuotientOptions& options);

/// Throws RegimeError("coercivity hypothesis violated") if lambda_min_h <= 0.
CoercivityEstimate estimate_coercivity(const ReducedBackground& bg, const Field& rpsi, const Field& btaupsi,
                                       const QuotientOptions& options = {});

}  // namespace cid

#endif  // CID_COERCIVITY_HPP
