#ifndef CID_CONTINUATION_HPP
#define CID_CONTINUATION_HPP

#include <optional>
#include <string>
#include <vector>

#include "cid/lichnerowicz.hpp"
#include "cid/momentum.hpp"

namespace cid {

/// A point (lambda, phi~, f~) on the family
///   8 Lap phi + R phi = lambda^2 B phi^5 + A_W / phi^7,
///   (4/3) f''         = lambda (2/3) phi^6 tau' - pi psi'.
struct LambdaState {
  double lambda = 0.0;
  Field phi_t;
  Field f_t;
  int newton_iters = 0;
  double jacobian_min_sv = 0.0;
  double residual = 0.0;     // sup norm of both equations
  double obstruction = 0.0;  // |multiplier on constants| * vol
  double energy_h = 0.0;
  double mu_const = 0.0;  // multiplier on the constant direction
  std::vector<double> residual_history;  // corrector residual before each Newton step and at exit
};

/// Unknowns are stacked as [phi; f; mu0]: the vector equation carries a
/// multiplier on the unit-normalised constant direction, closed by f having
/// zero mean, so the bordered Jacobian is square and nonsingular.
Vector pack_state(const LambdaState& s);
LambdaState unpack_state(const ReducedBackground& bg, double lambda, const Vector& x);

/// Bordered residual of the family at lambda (size 2M + 1).
Vector family_residual(const ReducedBackground& bg, const SeedData& seed, double lambda, const Vector& x);

/// Assembled bordered Jacobian of family_residual.
Matrix family_jacobian(const ReducedBackground& bg, const SeedData& seed, double lambda, const Vector& x);

/// Smallest singular value by inverse iteration on an LU factorisation.
double min_singular_value(const Matrix& jac, int iterations = 60);

/// Decoupled lambda = 0 solve: W~ from -pi dpsi alone, then the Lichnerowicz
/// equation with B dropped.
LambdaState solve_lambda0(const ReducedBackground& bg, const SeedData& seed, const CoercivityEstimate& estimate,
                          const LichOptions& options = {});

struct CorrectorOptions {
  double tol = 1e-10;
  int max_iter = 30;
};

/// Damped Newton on the bordered system. Throws NumericalError("Jacobian
/// singular") or ("Newton diverged").
LambdaState newton_corrector(const ReducedBackground& bg, const SeedData& seed, double lambda,
                             const LambdaState& guess, const CorrectorOptions& options = {});

struct ContinuationOptions {
  double lambda_max = 1.0;
  int num_steps = 16;
  double min_step = 1e-4;
  CorrectorOptions corrector;
};

struct Family {
  std::vector<LambdaState> states;  // states[0] is lambda = 0
  double lambda_reached = 0.0;
  bool stalled = false;
  std::string message;  // "continuation stalled at lambda = ..." when stalled
};

/// Uniform steps lambda_k = k lambda_max / num_steps with the previous state as
/// predictor; a failed corrector halves the step down to min_step. Stalling is
/// reported in the result, not thrown.
Family continue_family(const ReducedBackground& bg, const SeedData& seed, const CoercivityEstimate& estimate,
                       const ContinuationOptions& options = {}, const LichOptions& lich = {});

/// Same, starting from a given lambda = 0 state.
Family continue_family(const ReducedBackground& bg, const SeedData& seed, const LambdaState& start,
                       const ContinuationOptions& options);

struct RescaledSolution {
  double lambda = 0.0;
  Field phi;
  Field f;
  double sigma_amp_scaled = 0.0;
  Field pi_scaled;
  double epsilon = 0.0;
  double residual_lich = 0.0;
  double residual_vec = 0.0;
  bool degenerate = false;  // lambda = 0
};

/// phi = lambda^(1/2) phi~, f = lambda^2 f~, sigma, pi scaled by lambda^2,
/// epsilon = lambda^2. Checks the unscaled system with the scaled data and
/// throws NumericalError("rescaled residual too large") above `tol`.
RescaledSolution rescale(const ReducedBackground& bg, const LambdaState& state, const SeedData& seed,
                         double tol = 1e-8);

/// Seed with sigma and pi replaced by their rescaled values.
SeedData rescaled_seed(const SeedData& seed, double lambda);

}  // namespace cid

#endif  // CID_CONTINUATION_HPP
