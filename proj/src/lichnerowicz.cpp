#include "cid/lichnerowicz.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cid {
namespace {

constexpr double kN = kCritical;

Vector negative_part(const Vector& phi) { return (-phi).cwiseMax(0.0); }

// Diagonal of the linearised operator of the eps-regularised equation.
Vector jacobian_diagonal(const LichCoefficients& c, const MomentumDensity& d, const Vector& phi, double eps) {
  const auto p = phi.array();
  const Vector neg_v = negative_part(phi);
  const auto neg = neg_v.array();
  return (c.rpsi.values.array() - (kN - 1.0) * c.btaupsi.values.array() * p.abs().pow(kN - 2.0) +
          (kN + 1.0) * d.a_w.values.array() / (p + eps).pow(kN + 2.0) + kN * (kN - 1.0) * neg.pow(kN - 2.0))
      .matrix();
}

Matrix jacobian(const ReducedBackground& bg, const LichCoefficients& c, const MomentumDensity& d, const Vector& phi,
                double eps) {
  Matrix j = kConformalCoeff * bg.laplacian_matrix();
  j.diagonal() += jacobian_diagonal(c, d, phi, eps);
  return j;
}

double h_norm(const ReducedBackground& bg, const LichCoefficients& c, const Vector& phi) {
  return std::sqrt(std::max(0.0, weighted_form(bg, kConformalCoeff, c.rpsi.values, phi)));
}

std::string sci(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

Vector clamp(const Vector& v, const Vector& lo, const Vector& hi) { return v.cwiseMax(lo).cwiseMin(hi); }

// Newton step with nodes that sit on a bound and would be pushed through it
// held fixed; the remaining nodes solve the reduced system.
Vector projected_step(const Matrix& jac, const Vector& res, const Vector& phi, const Vector& lower,
                      const Vector& upper) {
  Vector step = Eigen::PartialPivLU<Matrix>(jac).solve(-res);
  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < phi.size(); ++i) {
    const bool blocked = (phi[i] <= lower[i] && step[i] < 0.0) || (phi[i] >= upper[i] && step[i] > 0.0);
    if (!blocked) free.push_back(i);
  }
  if (free.size() == static_cast<std::size_t>(phi.size())) return step;
  step.setZero();
  if (free.empty()) return step;
  const Matrix jff = jac(free, free);
  const Vector rf = res(free);
  const Vector sf = Eigen::PartialPivLU<Matrix>(jff).solve(-rf);
  step(free) = sf;
  return step;
}

struct StageResult {
  Vector phi;
  int iterations = 0;
  double residual = 0.0;
};

// One Newton solve of the eps-regularised equation inside [lower, upper].
StageResult newton_stage(const ReducedBackground& bg, const LichCoefficients& c, const MomentumDensity& d,
                         double eps, Vector phi, const Vector& lower, const Vector& upper, double radius,
                         const LichOptions& opt) {
  phi = clamp(phi, lower, upper);
  if (h_norm(bg, c, phi) > radius) throw RegimeError("left ball B_R0");
  Vector res = lichnerowicz_residual(bg, c, d, phi, eps);
  double res_inf = res.cwiseAbs().maxCoeff();
  int polish = 0;
  for (int it = 0; it < opt.max_newton; ++it) {
    if (res_inf <= opt.residual_tol) {
      if (polish++ >= 2) return {phi, it, res_inf};
    }
    const Vector step = projected_step(jacobian(bg, c, d, phi, eps), res, phi, lower, upper);
    if (!step.allFinite()) throw NumericalError("Newton stagnation: singular linearisation");
    double t = 1.0;
    bool left_ball = false;
    bool accepted = false;
    Vector trial;
    Vector trial_res;
    while (t > 1e-10) {
      trial = clamp(phi + t * step, lower, upper);
      if (h_norm(bg, c, trial) > radius) {
        left_ball = true;
        t *= 0.5;
        continue;
      }
      trial_res = lichnerowicz_residual(bg, c, d, trial, eps);
      if (trial_res.allFinite() && trial_res.norm() <= (1.0 - 1e-4 * t) * res.norm()) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      if (res_inf <= opt.residual_tol) return {phi, it, res_inf};
      if (left_ball) throw RegimeError("left ball B_R0");
      throw NumericalError("Newton stagnation at residual " + sci(res_inf));
    }
    const double moved = (trial - phi).cwiseAbs().maxCoeff();
    phi = std::move(trial);
    res = std::move(trial_res);
    res_inf = res.cwiseAbs().maxCoeff();
    if (moved <= opt.step_tol * std::max(1.0, phi.cwiseAbs().maxCoeff()) && res_inf <= opt.residual_tol)
      return {phi, it + 1, res_inf};
  }
  if (res_inf <= opt.residual_tol) return {phi, opt.max_newton, res_inf};
  throw NumericalError("Newton stagnation at residual " + sci(res_inf));
}

// Cholesky solve of 8 Lap u + R u = F plus one refinement step against the FFT
// operator; the dense factor alone carries ~cond * eps rounding (1e-11 at M = 256).
Vector refined_solve(const ReducedBackground& bg, const Eigen::LLT<Matrix>& llt, const Vector& rpsi,
                     const Vector& rhs) {
  Vector u = llt.solve(rhs);
  const Vector defect = rhs - kConformalCoeff * laplacian(bg, u) - rpsi.cwiseProduct(u);
  u += llt.solve(defect);
  return u;
}

// Largest pointwise value of the eps-subsolution residual (<= 0 for a subsolution).
double subsolution_residual(const ReducedBackground& bg, const LichCoefficients& c, const MomentumDensity& d,
                            const Vector& phi_sub, double eps) {
  return lichnerowicz_residual(bg, c, d, phi_sub, eps).maxCoeff();
}

double residual_scale(const LichCoefficients& c, const MomentumDensity& d, const Vector& phi) {
  const double lin = (c.rpsi.values.cwiseProduct(phi)).cwiseAbs().maxCoeff();
  return std::max({1.0, lin, d.a_w.values.maxCoeff() / std::pow(phi.minCoeff(), kN + 1.0)});
}

}  // namespace

MomentumDensity momentum_density(const ReducedBackground& bg, const SeedData& seed, const Field& f) {
  const Vector df = deriv(bg, f.values);
  Vector a(bg.size());
  for (int j = 0; j < bg.size(); ++j) a[j] = momentum_density_pointwise(seed.sigma_amp, df[j], seed.pi[j]);
  MomentumDensity out;
  out.integral_a = integrate(bg, a);
  const Parity par = (f.parity == Parity::odd || f.parity == Parity::even) && seed.pi.parity == Parity::even
                         ? Parity::even
                         : Parity::none;
  out.a_w = Field(std::move(a), par);
  return out;
}

MomentumDensity make_density(const ReducedBackground& bg, Vector a_w) {
  if (a_w.size() != bg.size()) throw PreconditionError("density size does not match grid");
  MomentumDensity out;
  out.integral_a = integrate(bg, a_w);
  out.a_w = Field(std::move(a_w));
  return out;
}

LichCoefficients make_coefficients(const Vector& rpsi, const Vector& btaupsi) {
  LichCoefficients c;
  c.rpsi = Field(rpsi);
  c.btaupsi = Field(btaupsi);
  c.b_minus = Field(btaupsi.cwiseMin(0.0));
  c.b_plus = Field(btaupsi.cwiseMax(0.0));
  c.sup_abs_b = btaupsi.cwiseAbs().maxCoeff();
  return c;
}

Field solve_linear_conformal(const ReducedBackground& bg, const Field& rpsi, const Field& rhs) {
  const Matrix op = weighted_operator(bg, kConformalCoeff, rpsi.values);
  const Eigen::LLT<Matrix> llt(op);
  if (llt.info() != Eigen::Success) throw RegimeError("not coercive");
  Vector u = refined_solve(bg, llt, rpsi.values, rhs.values);
  // The maximum principle only speaks about nonnegative sources.
  if (rhs.values.minCoeff() >= 0.0 && !(u.minCoeff() > 0.0)) throw NumericalError("positivity violated");
  return Field(std::move(u), rhs.parity);
}

SubsolutionCert build_subsolution(const ReducedBackground& bg, const LichCoefficients& coeffs,
                                  const MomentumDensity& density, double safety) {
  if (!(density.integral_a > 0.0)) throw PreconditionError("int A_W must be positive");
  const Matrix op = weighted_operator(bg, kConformalCoeff, coeffs.rpsi.values);
  const Eigen::LLT<Matrix> llt(op);
  if (llt.info() != Eigen::Success) throw RegimeError("not coercive");
  const Vector u1 = refined_solve(bg, llt, coeffs.rpsi.values, density.a_w.values);
  if (!(u1.minCoeff() > 0.0)) throw NumericalError("positivity violated");
  const Vector v = refined_solve(bg, llt, coeffs.rpsi.values, coeffs.b_minus.values);
  const bool has_negative_b = coeffs.b_minus.values.minCoeff() < 0.0;

  // Keep u above half of the alpha = 0 solution; this also gives positivity.
  double alpha = 1.0;
  Vector u = u1 + alpha * v;
  while (has_negative_b && u.minCoeff() < 0.5 * u1.minCoeff()) {
    alpha *= 0.5;
    if (alpha < 1e-300) throw NumericalError("alpha exhausted");
    u = u1 + alpha * v;
  }

  SubsolutionCert cert;
  const double umax = u.maxCoeff();
  cert.alpha = alpha;
  cert.theta = std::pow(umax, -(kN + 1.0) / (kN + 2.0));
  cert.theta_inline = std::pow(umax, (kN + 1.0) / (kN + 2.0));
  if (has_negative_b) {
    const double branch = std::pow(alpha, 1.0 / (kN - 2.0)) * std::pow(umax, (1.0 - kN) / (kN - 2.0));
    cert.theta = std::min(cert.theta, branch);
    cert.theta_inline = std::min(cert.theta_inline, branch);
  }
  cert.safety = safety;
  cert.phi_sub = Field(cert.effective_theta() * u, density.a_w.parity);
  cert.u = Field(std::move(u), density.a_w.parity);
  cert.max_residual = subsolution_residual(bg, coeffs, density, cert.phi_sub.values, 0.0);
  const double scale = residual_scale(coeffs, density, cert.phi_sub.values);
  if (cert.max_residual > 1e-12 * scale) throw NumericalError("subsolution check failed");
  return cert;
}

Field build_supersolution(const ReducedBackground& bg, const LichCoefficients& coeffs,
                          const MomentumDensity& density) {
  const double b_max = coeffs.btaupsi.values.maxCoeff();
  if (b_max <= 0.0) {
    const Field bar = solve_linear_conformal(bg, coeffs.rpsi, density.a_w);
    const double a = bar.values.minCoeff();
    // Any multiple >= 1 is still a supersolution when B <= 0; the small margin keeps
    // the barrier strictly above an exact solution so clamping never touches it.
    const double scale = (1.0 + kSupersolutionMargin) * std::pow(a, -(kN + 1.0) / (kN + 2.0));
    return Field(scale * bar.values, bar.parity);
  }

  // Constant barrier c with R_min c >= B_max c^5 + max(A) c^-7; take the
  // maximiser of the gap g(c) = R_min c - B_max c^5 - A_max c^-7.
  const double r_min = coeffs.rpsi.values.minCoeff();
  const double a_max = density.a_w.values.maxCoeff();
  if (!(r_min > 0.0)) throw RegimeError("no supersolution in smallness regime");
  auto gap = [&](double c) { return r_min * c - b_max * std::pow(c, kN - 1.0) - a_max * std::pow(c, -kN - 1.0); };
  auto slope = [&](double c) {
    return r_min - (kN - 1.0) * b_max * std::pow(c, kN - 2.0) + (kN + 1.0) * a_max * std::pow(c, -kN - 2.0);
  };
  // slope is strictly decreasing in c; bracket its root in log space.
  double lo = 1e-12;
  double hi = 1e12;
  for (int i = 0; i < 300; ++i) {
    const double mid = std::sqrt(lo * hi);
    (slope(mid) > 0.0 ? lo : hi) = mid;
  }
  const double c = std::sqrt(lo * hi);
  if (!(gap(c) > 0.0)) throw RegimeError("no supersolution in smallness regime");
  return Field(bg.constant(c), Parity::even);
}

Vector lichnerowicz_residual(const ReducedBackground& bg, const LichCoefficients& c, const MomentumDensity& d,
                             const Vector& phi, double eps) {
  const auto p = phi.array();
  const Vector neg_v = negative_part(phi);
  const auto neg = neg_v.array();
  return (kConformalCoeff * laplacian(bg, phi)).array().matrix() +
         (c.rpsi.values.array() * p - c.btaupsi.values.array() * p.abs().pow(kN - 2.0) * p -
          d.a_w.values.array() / (p + eps).pow(kN + 1.0) - kN * neg.pow(kN - 1.0))
             .matrix();
}

double functional_I(const ReducedBackground& bg, const LichCoefficients& c, const MomentumDensity& d,
                    const Field& phi) {
  if (!(phi.values.minCoeff() > 0.0)) throw PreconditionError("nonpositive phi");
  const auto p = phi.values.array();
  const double w = bg.node_weight();
  return 0.5 * weighted_form(bg, kConformalCoeff, c.rpsi.values, phi.values) -
         w * (c.btaupsi.values.array() * p.pow(kN)).sum() / kN + w * (d.a_w.values.array() / p.pow(kN)).sum() / kN;
}

double functional_I_eps(const ReducedBackground& bg, const LichCoefficients& c, const MomentumDensity& d,
                        const Field& phi, double eps) {
  if (!(eps > 0.0)) throw PreconditionError("eps must be positive");
  if (phi.values.minCoeff() < -0.5 * eps) throw PreconditionError("outside Omega_eps");
  const auto p = phi.values.array();
  const double w = bg.node_weight();
  return 0.5 * weighted_form(bg, kConformalCoeff, c.rpsi.values, phi.values) -
         w * (c.btaupsi.values.array() * p.abs().pow(kN)).sum() / kN +
         w * (d.a_w.values.array() / (p + eps).pow(kN)).sum() / kN + w * negative_part(phi.values).array().pow(kN).sum();
}

Vector functional_gradient(const ReducedBackground& bg, const LichCoefficients& c, const MomentumDensity& d,
                           const Vector& phi, double eps) {
  return bg.node_weight() * lichnerowicz_residual(bg, c, d, phi, eps);
}

double hessian_min_eig(const ReducedBackground& bg, const LichCoefficients& c, const MomentumDensity& d,
                       const Field& phi) {
  if (!(phi.values.minCoeff() > 0.0)) throw PreconditionError("nonpositive phi");
  return lowest_eigenvalue(jacobian(bg, c, d, phi.values, 0.0));
}

LichSolution solve_lichnerowicz(const ReducedBackground& bg, const LichCoefficients& coeffs,
                                const MomentumDensity& density, const CoercivityEstimate& estimate,
                                const LichOptions& options, const std::optional<Field>& initial) {
  if (!(density.integral_a > 0.0)) throw PreconditionError("int A_W must be positive");
  if (!(estimate.lambda_min_h > 0.0)) throw RegimeError("coercivity hypothesis violated");

  LichSolution sol;
  sol.ball_radius = options.enforce_ball ? ball_radius(estimate.s_est, coeffs.sup_abs_b)
                                         : std::numeric_limits<double>::infinity();
  sol.subsolution = build_subsolution(bg, coeffs, density, options.subsolution_safety);
  sol.phi_sub = sol.subsolution.phi_sub;
  try {
    sol.phi_sup = build_supersolution(bg, coeffs, density);
  } catch (const RegimeError&) {
    // Without a constant barrier the ball B_R0 is the only upper bound, as in
    // the variational argument; the ball test then decides the regime.
    if (!std::isfinite(sol.ball_radius)) throw;
    sol.phi_sup = Field(bg.constant(std::numeric_limits<double>::infinity()), Parity::even);
    sol.ball_barrier = true;
  }
  const Vector& sub = sol.phi_sub.values;
  const Vector& sup = sol.phi_sup.values;
  if ((sub.array() > sup.array()).any()) throw RegimeError("subsolution exceeds supersolution");

  const double a = integrate(bg, coeffs.rpsi.values);
  const double c = density.integral_a;
  const double eps0 = std::pow(c / a, 1.0 / (kN + 2.0));

  Vector phi;
  if (initial) {
    phi = initial->values;
    sol.eps_schedule = {0.0};
  } else {
    phi = bg.constant(eps0);
    for (int k = 0; k < options.eps_levels; ++k) sol.eps_schedule.push_back(std::ldexp(eps0, -k));
    sol.eps_schedule.push_back(0.0);
  }

  const double scale = residual_scale(coeffs, density, sub);
  Vector previous;
  for (double eps : sol.eps_schedule) {
    Vector lower = sub;
    if (eps > 0.0 && subsolution_residual(bg, coeffs, density, sub, eps) > 1e-12 * scale)
      lower = bg.constant(-0.5 * eps);
    StageResult stage = newton_stage(bg, coeffs, density, eps, phi, lower, sup, sol.ball_radius, options);
    sol.iterations += stage.iterations;
    if (previous.size() > 0) sol.eps_increments.push_back((stage.phi - previous).cwiseAbs().maxCoeff());
    previous = stage.phi;
    phi = std::move(stage.phi);
    sol.residual = stage.residual;
  }

  sol.phi = Field(phi, density.a_w.parity);
  sol.energy_h = weighted_form(bg, kConformalCoeff, coeffs.rpsi.values, phi);
  sol.functional_value = functional_I(bg, coeffs, density, sol.phi);
  sol.hessian_min_eig = hessian_min_eig(bg, coeffs, density, sol.phi);
  sol.stable = sol.hessian_min_eig > 0.0;
  if (!sol.stable) throw RegimeError("instability: Hessian is not positive definite");
  sol.energy_bound_constant = sol.energy_h / std::pow(c, 2.0 / (kN + 2.0));
  return sol;
}

Field minimize_lichnerowicz_descent(const ReducedBackground& bg, const LichCoefficients& coeffs,
                                    const MomentumDensity& density, const Field& lower, const Field& upper,
                                    const Field& initial, int max_iter, double tol) {
  Vector phi = clamp(initial.values, lower.values, upper.values);
  if (!(phi.minCoeff() > 0.0)) throw PreconditionError("nonpositive phi");
  Vector shift = coeffs.rpsi.values.array() + (kN + 1.0) * density.a_w.values.array() / phi.array().pow(kN + 2.0);
  Matrix precond = kConformalCoeff * bg.laplacian_matrix();
  precond.diagonal() += shift;
  const Eigen::LLT<Matrix> llt(precond);
  if (llt.info() != Eigen::Success) throw NumericalError("descent preconditioner is not positive definite");

  const double w = bg.node_weight();
  double value = functional_I(bg, coeffs, density, Field(phi));
  double step = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    const Vector grad = functional_gradient(bg, coeffs, density, phi);
    const Vector dir = llt.solve(grad) / w;
    bool accepted = false;
    Vector trial;
    double trial_value = value;
    while (step > 1e-16) {
      trial = clamp(phi - step * dir, lower.values, upper.values);
      if (trial.minCoeff() > 0.0) {
        trial_value = functional_I(bg, coeffs, density, Field(trial));
        if (trial_value <= value - 1e-4 * grad.dot(phi - trial)) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const double moved = (trial - phi).cwiseAbs().maxCoeff();
    phi = std::move(trial);
    value = trial_value;
    step = std::min(2.0 * step, 1.0);
    if (moved < tol) break;
  }
  return Field(std::move(phi), initial.parity);
}

}  // namespace cid
