#ifndef CID_MOMENTUM_HPP
#define CID_MOMENTUM_HPP

#include "cid/coercivity.hpp"
#include "cid/seed.hpp"

namespace cid {

/// Solution W = f dtheta of the reduced vector equation (4/3) f'' = rhs.
///
/// The product background carries the Killing field d/dtheta, so the reduced
/// operator annihilates constants. The solve works on zero-mean f and reports
/// the pairing of the right-hand side against d/dtheta as `obstruction`.
struct VectorSolve {
  Field f;
  double obstruction = 0.0;
  double residual = 0.0;
};

inline constexpr double kObstructionTol = 1e-10;

/// (2/3) phi^6 tau' - pi psi'.
Field vector_rhs(const ReducedBackground& bg, const SeedData& seed, const Field& phi);

/// Right-hand side with the phi^6 dtau coupling scaled by `coupling`.
Field vector_rhs(const ReducedBackground& bg, const SeedData& seed, const Field& phi, double coupling);

/// Exact Fourier inversion. In strict mode throws RegimeError("obstruction above
/// tolerance") when |mean(rhs)| vol > 1e-10; otherwise the mean is projected away.
VectorSolve solve_vector(const ReducedBackground& bg, const Field& rhs, bool strict = true);

/// Pointwise residual (4/3) f'' - rhs(phi) of the vector equation, with the
/// phi^6 dtau coupling scaled by `coupling`.
Vector vector_residual(const ReducedBackground& bg, const SeedData& seed, const Field& phi, const Field& f,
                       double coupling = 1.0);

/// Upper estimate of the best constant gamma in
/// int |LW|^2 dmu >= gamma (int |W|^6 dmu)^(1/3) over zero-mean W = f dtheta.
QuotientResult estimate_gamma(const ReducedBackground& bg, const QuotientOptions& options = {});

}  // namespace cid

#endif  // CID_MOMENTUM_HPP
