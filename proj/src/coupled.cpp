#include "cid/coupled.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cid {
namespace {

constexpr double kN = kCritical;
constexpr double kStableExponent = 2.0 * kN / (kN + 2.0);

double l3_norm_sq(const ReducedBackground& bg, const Vector& u) { return std::pow(lp_norm(bg, u, 3.0), 2.0); }

}  // namespace

double StableSetParams::map(double y0) const { return std::pow((x + c1 * y0) / lam, kStableExponent); }

// Contracting the vector equation with W and using Hoelder (L^2 x L^3 x L^6)
// and Young with weights alpha, beta:
//   Q (1/2 - T/(3 alpha gamma) - P/(2 beta gamma)) <= alpha Y/3 + beta int pi^2 / 2,
// Q = int |LW|^2, T = ||dtau||_3^2, P = ||dpsi||_3^2, Y = int phi^12. The cross
// term int <sigma, LW> vanishes because sigma is divergence free.
VectorConstants constants_c1_c2(const ReducedBackground& bg, const SeedData& seed, double gamma_est) {
  if (!(gamma_est > 0.0)) throw PreconditionError("gamma estimate must be positive");
  VectorConstants k;
  k.gamma = gamma_est;
  k.dtau_sq = l3_norm_sq(bg, deriv(bg, seed.tau.values));
  k.dpsi_sq = l3_norm_sq(bg, deriv(bg, seed.psi.values));
  k.alpha = (8.0 / 3.0) * k.dtau_sq / gamma_est;
  k.beta = 4.0 * k.dpsi_sq / gamma_est;
  k.bracket = 0.5;
  if (k.alpha > 0.0) k.bracket -= k.dtau_sq / (3.0 * k.alpha * gamma_est);
  if (k.beta > 0.0) k.bracket -= k.dpsi_sq / (2.0 * k.beta * gamma_est);
  k.c1 = k.alpha / (3.0 * k.bracket);
  k.c2 = k.beta / (2.0 * k.bracket);
  return k;
}

StableSetParams stable_set_params(const ReducedBackground& bg, const SeedData& seed,
                                  const CoercivityEstimate& estimate, const VectorConstants& constants) {
  StableSetParams p;
  p.c1 = constants.c1;
  p.c2 = constants.c2;
  p.x = sigma_norm_sq(seed.sigma_amp) * bg.volume() +
        (1.0 + p.c2) * integrate(bg, seed.pi.values.array().square().matrix());
  p.lam = 0.5 * estimate.s_prime_est * std::pow(bg.volume(), -(kN - 2.0) / (2.0 * kN));
  p.R = 2.0 * std::pow(p.x / p.lam, kStableExponent);
  p.f_of_R = p.map(p.R);
  const auto coeffs = coefficients(bg, seed);
  const double b_plus = coeffs.b_plus.values.maxCoeff();
  p.absorbs_b = b_plus * std::pow(p.R, (kN - 2.0) / (2.0 * kN)) <= p.lam;
  p.feasible = p.R > 0.0 && p.f_of_R <= p.R && p.absorbs_b;
  return p;
}

CoupledState phi_map(const ReducedBackground& bg, const SeedData& seed, const CoercivityEstimate& estimate,
                     const StableSetParams& params, const Field& phi0, const CoupledOptions& options,
                     const std::optional<Field>& warm) {
  const auto coeffs = coefficients(bg, seed);
  const VectorSolve vec = solve_vector(bg, vector_rhs(bg, seed, phi0), options.strict_momentum);
  const MomentumDensity density = momentum_density(bg, seed, vec.f);

  CoupledState s;
  s.lich = solve_lichnerowicz(bg, coeffs, density, estimate, options.lich, warm);
  s.phi = s.lich.phi;
  s.f = vec.f;
  s.obstruction = vec.obstruction;
  s.y = integrate(bg, s.phi.values.array().pow(2.0 * kN).matrix());
  s.in_C = s.y <= params.R;
  s.delta = (s.phi.values - phi0.values).cwiseAbs().maxCoeff();
  const double y0 = integrate(bg, phi0.values.array().pow(2.0 * kN).matrix());
  s.y_bound = params.map(y0);
  s.a_integral = density.integral_a;
  s.a_bound = sigma_norm_sq(seed.sigma_amp) * bg.volume() + params.c1 * y0 +
              (1.0 + params.c2) * integrate(bg, seed.pi.values.array().square().matrix());
  s.residual_lich = s.lich.residual;
  s.residual_vec = vector_residual(bg, seed, s.phi, s.f).cwiseAbs().maxCoeff();
  return s;
}

CoupledRun solve_coupled(const ReducedBackground& bg, const SeedData& seed, const CoercivityEstimate& estimate,
                         const std::optional<Field>& init, const CoupledOptions& options) {
  return solve_coupled(bg, seed, estimate, constants_c1_c2(bg, seed, estimate_gamma(bg).value), init, options);
}

CoupledRun solve_coupled(const ReducedBackground& bg, const SeedData& seed, const CoercivityEstimate& estimate,
                         const VectorConstants& constants, const std::optional<Field>& init,
                         const CoupledOptions& options) {
  CoupledRun run;
  run.constants = constants;
  run.params = stable_set_params(bg, seed, estimate, constants);

  Field phi;
  if (init) {
    phi = *init;
  } else {
    const auto coeffs = coefficients(bg, seed);
    const Field zero(bg.constant(0.0), Parity::odd);
    phi = solve_lichnerowicz(bg, coeffs, momentum_density(bg, seed, zero), estimate, options.lich).phi;
  }
  const double y_init = integrate(bg, phi.values.array().pow(2.0 * kN).matrix());
  run.trace.push_back({0, 0.0, y_init, 0.0, y_init <= run.params.R, 0.0, 0.0, 0.0});

  std::vector<double> deltas;
  for (int it = 1; it <= options.max_iter; ++it) {
    CoupledState next = phi_map(bg, seed, estimate, run.params, phi, options, phi);
    next.iter = it;
    run.trace.push_back({it, next.delta, next.y, next.y_bound, next.in_C, next.residual_lich, next.residual_vec,
                         next.obstruction});
    if (!(next.y <= next.y_bound * (1.0 + 1e-12)) || !next.in_C) run.stable_set_preserved = false;
    deltas.push_back(next.delta);
    phi = next.phi;
    run.state = std::move(next);
    if (run.state.delta < options.tol) {
      run.converged = run.state.residual_lich < options.residual_tol && run.state.residual_vec < options.residual_tol;
      if (!run.converged) throw NumericalError("fixed point reached but conformal residuals exceed tolerance");
      return run;
    }
  }
  std::ostringstream msg;
  msg << "no convergence after " << options.max_iter << " iterations; last deltas:";
  for (std::size_t i = deltas.size() > 5 ? deltas.size() - 5 : 0; i < deltas.size(); ++i) msg << ' ' << deltas[i];
  throw NumericalError(msg.str());
}

}  // namespace cid
