#ifndef CID_LICHNEROWICZ_HPP
#define CID_LICHNEROWICZ_HPP

#include <optional>
#include <vector>

#include "cid/coercivity.hpp"
#include "cid/seed.hpp"

namespace cid {

/// A_W = |sigma + LW|^2 + pi^2 pointwise, and its integral.
struct MomentumDensity {
  Field a_w;
  double integral_a = 0.0;
};

/// |sigma + LW|^2 + pi^2 for W = f dtheta at one point:
/// 6 s0^2 + 8 s0 f' + (8/3) f'^2 + pi^2, a perfect square plus pi^2.
inline double momentum_density_pointwise(double s0, double df, double pi) {
  return 6.0 * s0 * s0 + 8.0 * s0 * df + (8.0 / 3.0) * df * df + pi * pi;
}

MomentumDensity momentum_density(const ReducedBackground& bg, const SeedData& seed, const Field& f);

/// Wraps an arbitrary nonnegative density (used for manufactured problems).
MomentumDensity make_density(const ReducedBackground& bg, Vector a_w);

/// Coefficients from explicit R_psi and B fields.
LichCoefficients make_coefficients(const Vector& rpsi, const Vector& btaupsi);

struct LichOptions {
  double residual_tol = 1e-9;
  double step_tol = 1e-12;
  int eps_levels = 6;
  int max_newton = 60;
  double subsolution_safety = 0.5;
  bool enforce_ball = true;
};

/// Positive subsolution theta * safety * u with u solving
/// 8 Lap u + R u = A_W + alpha B_-.
struct SubsolutionCert {
  Field u;
  double alpha = 1.0;
  double theta = 0.0;         // from theta^(N+2) <= u^(-N-1) and the alpha branch
  double theta_inline = 0.0;  // same bound with the exponent (N+1)/(N+2) taken literally
  double safety = 0.5;
  Field phi_sub;
  double max_residual = 0.0;  // max of the subsolution residual at eps = 0 (must be <= 0)

  double effective_theta() const { return theta * safety; }
};

struct LichSolution {
  Field phi;
  double energy_h = 0.0;
  Field phi_sub;
  Field phi_sup;       // +inf everywhere when ball_barrier
  bool ball_barrier = false;  // no constant supersolution; B_R0 is the upper barrier
  std::vector<double> eps_schedule;
  std::vector<double> eps_increments;  // sup-norm change between consecutive eps solves
  bool stable = false;
  double hessian_min_eig = 0.0;
  int iterations = 0;
  double functional_value = 0.0;
  double residual = 0.0;
  double ball_radius = 0.0;
  double energy_bound_constant = 0.0;  // ||phi||_h^2 / (int A_W)^(2/(N+2))
  SubsolutionCert subsolution;
};

/// Dense solve of 8 Lap u + R u = F with a discrete maximum-principle check
/// (min u > 0, applied when F >= 0).
/// Throws RegimeError("not coercive") or NumericalError("positivity violated").
Field solve_linear_conformal(const ReducedBackground& bg, const Field& rpsi, const Field& rhs);

SubsolutionCert build_subsolution(const ReducedBackground& bg, const LichCoefficients& coeffs,
                                  const MomentumDensity& density, double safety = 0.5);

/// Relative inflation of the B <= 0 supersolution (min phibar)^(-(N+1)/(N+2)) phibar.
inline constexpr double kSupersolutionMargin = 1e-8;

/// B <= 0: the rescaled solution of 8 Lap phibar + R phibar = A_W (inflated by the margin).
/// Otherwise the constant c maximising R_min c - B_max c^(N-1) - max(A_W) c^(-N-1),
/// or RegimeError("no supersolution in smallness regime") if that maximum is <= 0.
Field build_supersolution(const ReducedBackground& bg, const LichCoefficients& coeffs,
                          const MomentumDensity& density);

/// Pointwise residual of the eps-regularised equation
/// 8 Lap phi + R phi - B |phi|^4 phi - A/(phi+eps)^7 - 6 phi_-^5.
Vector lichnerowicz_residual(const ReducedBackground& bg, const LichCoefficients& coeffs,
                             const MomentumDensity& density, const Vector& phi, double eps = 0.0);

double functional_I(const ReducedBackground& bg, const LichCoefficients& coeffs, const MomentumDensity& density,
                    const Field& phi);

double functional_I_eps(const ReducedBackground& bg, const LichCoefficients& coeffs,
                        const MomentumDensity& density, const Field& phi, double eps);

/// Euclidean gradient of the discrete functional I^eps (eps = 0 gives I).
Vector functional_gradient(const ReducedBackground& bg, const LichCoefficients& coeffs,
                           const MomentumDensity& density, const Vector& phi, double eps = 0.0);

double hessian_min_eig(const ReducedBackground& bg, const LichCoefficients& coeffs, const MomentumDensity& density,
                       const Field& phi);

/// Safeguarded Newton with the eps-continuation, sub/supersolution clamping and
/// the B_R0 ball test. If no constant supersolution exists, the ball alone
/// bounds the iterates from above. With `initial` set, the eps schedule is skipped and the
/// unregularised equation is solved from that guess.
LichSolution solve_lichnerowicz(const ReducedBackground& bg, const LichCoefficients& coeffs,
                                const MomentumDensity& density, const CoercivityEstimate& estimate,
                                const LichOptions& options = {}, const std::optional<Field>& initial = {});

/// Projected Sobolev-gradient descent on I over [phi_sub, phi_sup]; slow
/// cross-check for the Newton path.
Field minimize_lichnerowicz_descent(const ReducedBackground& bg, const LichCoefficients& coeffs,
                                    const MomentumDensity& density, const Field& lower, const Field& upper,
                                    const Field& initial, int max_iter = 20000, double tol = 1e-12);

}  // namespace cid

#endif  // CID_LICHNEROWICZ_HPP
