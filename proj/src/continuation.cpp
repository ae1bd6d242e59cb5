#include "cid/continuation.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cid {
namespace {

constexpr double kN = kCritical;

Vector density_values(const ReducedBackground& bg, const SeedData& seed, const Vector& f) {
  const Vector df = deriv(bg, f);
  Vector a(bg.size());
  for (int j = 0; j < bg.size(); ++j) a[j] = momentum_density_pointwise(seed.sigma_amp, df[j], seed.pi[j]);
  return a;
}

double sup_norm_equations(const Vector& res, int m) { return res.head(2 * m).cwiseAbs().maxCoeff(); }

LambdaState finish_state(const ReducedBackground& bg, const SeedData& seed, double lambda, const Vector& x,
                         const Matrix& jac, int iters) {
  LambdaState s = unpack_state(bg, lambda, x);
  s.newton_iters = iters;
  s.residual = sup_norm_equations(family_residual(bg, seed, lambda, x), bg.size());
  s.jacobian_min_sv = min_singular_value(jac);
  s.energy_h = h_norm_sq(bg, coefficients(bg, seed).rpsi, s.phi_t);
  return s;
}

}  // namespace

Vector pack_state(const LambdaState& s) {
  const Eigen::Index m = s.phi_t.size();
  Vector x(2 * m + 1);
  x << s.phi_t.values, s.f_t.values, s.mu_const;
  return x;
}

LambdaState unpack_state(const ReducedBackground& bg, double lambda, const Vector& x) {
  const int m = bg.size();
  if (x.size() != 2 * m + 1) throw PreconditionError("state vector size does not match grid");
  LambdaState s;
  s.lambda = lambda;
  s.phi_t = Field(x.head(m), Parity::even);
  s.f_t = Field(x.segment(m, m), Parity::odd);
  s.mu_const = x[2 * m];
  s.obstruction = std::abs(s.mu_const) / std::sqrt(double(m)) * bg.volume();
  return s;
}

Vector family_residual(const ReducedBackground& bg, const SeedData& seed, double lambda, const Vector& x) {
  const int m = bg.size();
  if (x.size() != 2 * m + 1) throw PreconditionError("state vector size does not match grid");
  const auto coeffs = coefficients(bg, seed);
  const Vector phi = x.head(m);
  const Vector f = x.segment(m, m);
  const Vector a = density_values(bg, seed, f);
  const double unit = 1.0 / std::sqrt(double(m));
  const Vector e0 = Vector::Constant(m, unit);
  const auto p = phi.array();

  Vector res(2 * m + 1);
  res.head(m) = kConformalCoeff * laplacian(bg, phi) +
                (coeffs.rpsi.values.array() * p - lambda * lambda * coeffs.btaupsi.values.array() * p.pow(kN - 1.0) -
                 a.array() / p.pow(kN + 1.0))
                    .matrix();
  res.segment(m, m) = -(4.0 / 3.0) * laplacian(bg, f) - vector_rhs(bg, seed, Field(phi), lambda).values +
                      x[2 * m] * e0;
  res[2 * m] = e0.dot(f);
  return res;
}

Matrix family_jacobian(const ReducedBackground& bg, const SeedData& seed, double lambda, const Vector& x) {
  const int m = bg.size();
  if (x.size() != 2 * m + 1) throw PreconditionError("state vector size does not match grid");
  const auto coeffs = coefficients(bg, seed);
  const Vector phi = x.head(m);
  const Vector f = x.segment(m, m);
  const Vector df = deriv(bg, f);
  const Vector a = density_values(bg, seed, f);
  const Vector dtau = deriv(bg, seed.tau.values);
  const double unit = 1.0 / std::sqrt(double(m));
  const Vector e0 = Vector::Constant(m, unit);
  const auto p = phi.array();

  Matrix j = Matrix::Zero(2 * m + 1, 2 * m + 1);
  j.topLeftCorner(m, m) = kConformalCoeff * bg.laplacian_matrix();
  j.topLeftCorner(m, m).diagonal() +=
      (coeffs.rpsi.values.array() - (kN - 1.0) * lambda * lambda * coeffs.btaupsi.values.array() * p.pow(kN - 2.0) +
       (kN + 1.0) * a.array() / p.pow(kN + 2.0))
          .matrix();
  // d(A_W)/d(f') = 8 s0 + (16/3) f'.
  const Vector da = ((8.0 * seed.sigma_amp + (16.0 / 3.0) * df.array()) / p.pow(kN + 1.0)).matrix();
  j.block(0, m, m, m) = -(da.asDiagonal() * bg.diff_matrix());
  j.block(m, 0, m, m).diagonal() = (-(2.0 / 3.0) * kN * lambda * p.pow(kN - 1.0) * dtau.array()).matrix();
  j.block(m, m, m, m) = -(4.0 / 3.0) * bg.laplacian_matrix();
  j.block(m, 2 * m, m, 1) = e0;
  j.block(2 * m, m, 1, m) = e0.transpose();
  return j;
}

double min_singular_value(const Matrix& jac, int iterations) {
  const Eigen::PartialPivLU<Matrix> lu(jac);
  Vector v = Vector::LinSpaced(jac.cols(), 1.0, 2.0);
  v.normalize();
  double norm = 0.0;
  for (int i = 0; i < iterations; ++i) {
    const Vector w = lu.solve(v);
    const Vector z = lu.transpose().solve(w);
    norm = z.norm();
    if (!std::isfinite(norm) || norm == 0.0) return 0.0;
    v = z / norm;
  }
  return 1.0 / std::sqrt(norm);
}

LambdaState solve_lambda0(const ReducedBackground& bg, const SeedData& seed, const CoercivityEstimate& estimate,
                          const LichOptions& options) {
  const int m = bg.size();
  const Field one(bg.constant(1.0), Parity::even);
  const Field rhs = vector_rhs(bg, seed, one, 0.0);
  const VectorSolve vec = solve_vector(bg, rhs, false);
  const auto full = coefficients(bg, seed);
  const auto coeffs = make_coefficients(full.rpsi.values, bg.constant(0.0));
  const auto lich = solve_lichnerowicz(bg, coeffs, momentum_density(bg, seed, vec.f), estimate, options);

  LambdaState guess;
  guess.phi_t = lich.phi;
  guess.f_t = vec.f;
  guess.mu_const = rhs.values.sum() / std::sqrt(double(m));
  const Vector x = pack_state(guess);
  return finish_state(bg, seed, 0.0, x, family_jacobian(bg, seed, 0.0, x), 0);
}

LambdaState newton_corrector(const ReducedBackground& bg, const SeedData& seed, double lambda,
                             const LambdaState& guess, const CorrectorOptions& options) {
  const int m = bg.size();
  Vector x = pack_state(guess);
  if (!(x.head(m).minCoeff() > 0.0)) throw PreconditionError("nonpositive phi in guess");
  Vector res = family_residual(bg, seed, lambda, x);
  std::vector<double> history;
  auto done = [&](const Matrix& jac, int it) {
    LambdaState s = finish_state(bg, seed, lambda, x, jac, it);
    s.residual_history = history;
    return s;
  };
  for (int it = 0; it <= options.max_iter; ++it) {
    const Matrix jac = family_jacobian(bg, seed, lambda, x);
    history.push_back(sup_norm_equations(res, m));
    if (history.back() < options.tol) return done(jac, it);
    if (it == options.max_iter) break;
    const Eigen::PartialPivLU<Matrix> lu(jac);
    const Vector step = lu.solve(-res);
    if (!step.allFinite() || (jac * step + res).norm() > 1e-6 * (1.0 + res.norm()))
      throw NumericalError("Jacobian singular");
    double t = 1.0;
    bool accepted = false;
    while (t > 1.0 / 1024.0) {
      const Vector trial = x + t * step;
      if (trial.head(m).minCoeff() > 0.0) {
        Vector trial_res = family_residual(bg, seed, lambda, trial);
        if (trial_res.allFinite() && trial_res.norm() <= (1.0 - 1e-4 * t) * res.norm()) {
          x = trial;
          res = std::move(trial_res);
          accepted = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!accepted) {
      if (sup_norm_equations(res, m) < 10.0 * options.tol) return done(jac, it);
      throw NumericalError("Newton diverged");
    }
  }
  throw NumericalError("Newton diverged");
}

Family continue_family(const ReducedBackground& bg, const SeedData& seed, const CoercivityEstimate& estimate,
                       const ContinuationOptions& options, const LichOptions& lich) {
  return continue_family(bg, seed, solve_lambda0(bg, seed, estimate, lich), options);
}

Family continue_family(const ReducedBackground& bg, const SeedData& seed, const LambdaState& start,
                       const ContinuationOptions& options) {
  if (!(options.lambda_max > 0.0) || options.lambda_max > 1.0) throw PreconditionError("lambda_max must be in (0, 1]");
  if (options.num_steps < 1) throw PreconditionError("num_steps must be positive");
  Family fam;
  fam.states.push_back(start);
  LambdaState current = start;
  for (int k = 1; k <= options.num_steps; ++k) {
    const double target = options.lambda_max * k / options.num_steps;
    double step = target - current.lambda;
    while (current.lambda < target) {
      const double next = step >= target - current.lambda ? target : current.lambda + step;
      try {
        current = newton_corrector(bg, seed, next, current, options.corrector);
        fam.states.push_back(current);
        step = target - current.lambda;
      } catch (const NumericalError&) {
        step *= 0.5;
        if (step < options.min_step) {
          fam.stalled = true;
          fam.lambda_reached = current.lambda;
          std::ostringstream msg;
          msg << "continuation stalled at lambda = " << current.lambda;
          fam.message = msg.str();
          return fam;
        }
      }
    }
  }
  fam.lambda_reached = current.lambda;
  return fam;
}

SeedData rescaled_seed(const SeedData& seed, double lambda) {
  return scale_data(seed, std::pow(lambda, (kN + 2.0) / (kN - 2.0)));
}

RescaledSolution rescale(const ReducedBackground& bg, const LambdaState& state, const SeedData& seed, double tol) {
  RescaledSolution r;
  r.lambda = state.lambda;
  const double lam = state.lambda;
  const double amp = std::pow(lam, (kN + 2.0) / (kN - 2.0));
  r.epsilon = amp;
  r.sigma_amp_scaled = amp * seed.sigma_amp;
  r.pi_scaled = Field(amp * seed.pi.values, seed.pi.parity);
  r.phi = Field(std::pow(lam, 2.0 / (kN - 2.0)) * state.phi_t.values, state.phi_t.parity);
  r.f = Field(amp * state.f_t.values, state.f_t.parity);
  if (lam <= 0.0) {
    r.degenerate = true;
    return r;
  }
  const SeedData scaled = rescaled_seed(seed, lam);
  const auto coeffs = coefficients(bg, scaled);
  r.residual_lich =
      lichnerowicz_residual(bg, coeffs, momentum_density(bg, scaled, r.f), r.phi.values).cwiseAbs().maxCoeff();
  r.residual_vec = vector_residual(bg, scaled, r.phi, r.f).cwiseAbs().maxCoeff();
  if (!(std::max(r.residual_lich, r.residual_vec) <= tol)) throw NumericalError("rescaled residual too large");
  return r;
}

}  // namespace cid
