#ifndef CID_COUPLED_HPP
#define CID_COUPLED_HPP

#include <optional>
#include <vector>

#include "cid/lichnerowicz.hpp"
#include "cid/momentum.hpp"

namespace cid {

/// Constants in  int A_W <= int |sigma|^2 + c1 int phi0^(2N) + (1 + c2) int pi^2,
/// valid for W solving the vector equation with phi0.
struct VectorConstants {
  double c1 = 0.0;
  double c2 = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double bracket = 0.5;
  double dtau_sq = 0.0;  // ||dtau||_{L^3}^2
  double dpsi_sq = 0.0;  // ||dpsi||_{L^3}^2
  double gamma = 0.0;
};

/// Stable set C = { int phi^(2N) <= R } for the fixed-point map.
struct StableSetParams {
  double x = 0.0;    // int (|sigma|^2 + (1 + c2) pi^2)
  double lam = 0.0;  // (s'/2) vol^(-1/3)
  double R = 0.0;    // 2 (x / lam)^(2N/(N+2))
  double c1 = 0.0;
  double c2 = 0.0;
  double f_of_R = 0.0;
  /// sup B_+ R^((N-2)/(2N)) <= lam: the B phi^(2N) term can be absorbed on C.
  bool absorbs_b = true;
  bool feasible = false;  // f(R) <= R and absorbs_b

  /// f(y0) = ((x + c1 y0) / lam)^(2N/(N+2)).
  double map(double y0) const;
};

VectorConstants constants_c1_c2(const ReducedBackground& bg, const SeedData& seed, double gamma_est);

StableSetParams stable_set_params(const ReducedBackground& bg, const SeedData& seed,
                                  const CoercivityEstimate& estimate, const VectorConstants& constants);

struct CoupledOptions {
  double tol = 1e-10;           // sup-norm change of phi between iterates
  int max_iter = 200;
  double residual_tol = 1e-8;   // final conformal residuals
  bool strict_momentum = true;
  LichOptions lich;
};

struct CoupledState {
  Field phi;
  Field f;
  int iter = 0;
  double y = 0.0;  // int phi^(2N)
  bool in_C = false;
  double delta = 0.0;
  double residual_lich = 0.0;
  double residual_vec = 0.0;
  double obstruction = 0.0;
  double y_bound = 0.0;    // f(y0) for the input of this step
  double a_integral = 0.0; // int A_W for the W of this step
  double a_bound = 0.0;    // int |sigma|^2 + c1 y0 + (1 + c2) int pi^2
  LichSolution lich;
};

/// One application of the map: W from phi0, then the Lichnerowicz solve with
/// A_W. `warm` seeds the Newton solve (skipping the eps schedule).
CoupledState phi_map(const ReducedBackground& bg, const SeedData& seed, const CoercivityEstimate& estimate,
                     const StableSetParams& params, const Field& phi0, const CoupledOptions& options = {},
                     const std::optional<Field>& warm = {});

struct CoupledTraceRow {
  int iter = 0;
  double delta = 0.0;
  double y = 0.0;
  double y_bound = 0.0;
  bool in_C = false;
  double residual_lich = 0.0;
  double residual_vec = 0.0;
  double obstruction = 0.0;
};

struct CoupledRun {
  CoupledState state;
  VectorConstants constants;
  StableSetParams params;
  std::vector<CoupledTraceRow> trace;
  bool converged = false;
  bool stable_set_preserved = true;  // y <= f(y0) <= R at every iterate
};

/// Picard iteration of the map from `init` (default: the W = 0 solve) until
/// the phi update is below tol. Throws NumericalError("no convergence ...")
/// after max_iter; solver errors propagate.
CoupledRun solve_coupled(const ReducedBackground& bg, const SeedData& seed, const CoercivityEstimate& estimate,
                         const std::optional<Field>& init = {}, const CoupledOptions& options = {});

/// Same, with precomputed vector constants (skips the gamma estimate).
CoupledRun solve_coupled(const ReducedBackground& bg, const SeedData& seed, const CoercivityEstimate& estimate,
                         const VectorConstants& constants, const std::optional<Field>& init,
                         const CoupledOptions& options);

}  // namespace cid

#endif  // CID_COUPLED_HPP
