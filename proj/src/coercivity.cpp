#include "cid/coercivity.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <random>

namespace cid {
namespace {

struct QuotientParts {
  double numerator;
  double power_sum;  // int |u|^6 dmu
  double value;
};

// Applies coeff * Laplacian + diag(rpsi) through the FFT path, which maps
// constants to exact zeros; the dense matrix only preconditions.
Vector apply_form(const ReducedBackground& bg, const QuadraticForm& form, const Vector& u) {
  return form.coeff * laplacian(bg, u) + form.rpsi.cwiseProduct(u);
}

QuotientParts evaluate(const ReducedBackground& bg, const QuadraticForm& form, const Vector& u) {
  const double w = bg.node_weight();
  const double num = w * u.dot(apply_form(bg, form, u));
  const double s = w * u.array().abs().pow(kCritical).sum();
  return {num, s, num / std::cbrt(s)};
}

class TrialSpace {
 public:
  TrialSpace(const ReducedBackground& bg, bool zero_mean) : nyquist_(bg.nyquist_mode()), zero_mean_(zero_mean) {}

  void project(Vector& u) const {
    const double m = static_cast<double>(u.size());
    u -= (u.dot(nyquist_) / m) * nyquist_;
    if (zero_mean_) u.array() -= u.mean();
  }

 private:
  Vector nyquist_;
  bool zero_mean_;
};

void normalize(const ReducedBackground& bg, Vector& u) {
  const double s = bg.node_weight() * u.array().abs().pow(kCritical).sum();
  u /= std::pow(s, 1.0 / kCritical);
}

// Sobolev-preconditioned descent from one start; returns the final quotient.
double descend(const ReducedBackground& bg, const QuadraticForm& form, const Eigen::LDLT<Matrix>& precond,
               const TrialSpace& space, Vector& u, const QuotientOptions& opt) {
  const double w = bg.node_weight();
  space.project(u);
  normalize(bg, u);
  QuotientParts cur = evaluate(bg, form, u);
  double step = 0.25;
  for (int it = 0; it < opt.max_iter; ++it) {
    // Gradient of n / S^(1/3) at S = 1.
    const Vector grad_n = 2.0 * w * apply_form(bg, form, u);
    const Vector grad_d = 2.0 * w * u.array().abs().pow(kCritical - 2).cwiseProduct(u.array()).matrix();
    const Vector grad = grad_n - cur.value * grad_d;
    Vector dir = precond.solve(grad) / w;
    space.project(dir);
    const double slope = grad.dot(dir);
    if (!(slope > 0.0)) break;

    bool accepted = false;
    QuotientParts next{};
    Vector trial;
    while (step > 1e-14) {
      trial = u - step * dir;
      space.project(trial);
      normalize(bg, trial);
      next = evaluate(bg, form, trial);
      if (next.value <= cur.value - 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const double decrease = cur.value - next.value;
    u = std::move(trial);
    cur = next;
    step = std::min(2.0 * step, 4.0);
    if (decrease <= opt.rel_tol * std::abs(cur.value)) break;
  }
  return cur.value;
}

Vector random_start(const ReducedBackground& bg, std::mt19937_64& rng, bool zero_mean) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector u = bg.constant(zero_mean ? 0.0 : 1.0);
  const double omega = bg.wave_number(1);
  for (int k = 1; k <= 6; ++k) {
    const double a = 0.5 * gauss(rng) / k;
    const double b = 0.5 * gauss(rng) / k;
    for (int j = 0; j < bg.size(); ++j) {
      const double x = omega * k * bg.nodes()[j];
      u[j] += a * std::cos(x) + b * std::sin(x);
    }
  }
  return u;
}

}  // namespace

double sobolev_quotient(const ReducedBackground& bg, const QuadraticForm& form, const Vector& u) {
  return evaluate(bg, form, u).value;
}

double lowest_eigenvalue(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("symmetric eigensolve failed");
  return solver.eigenvalues().minCoeff();
}

double ball_radius(double s, double sup_abs_b) {
  if (sup_abs_b <= 0.0) return std::numeric_limits<double>::infinity();
  const double n = kCritical;
  return std::sqrt(s) * std::pow(s / (2.0 * (n - 1.0) * sup_abs_b), 1.0 / (n - 2.0));
}

QuotientResult minimize_sobolev_quotient(const ReducedBackground& bg, const QuadraticForm& form,
                                         const QuotientOptions& options) {
  if (form.rpsi.size() != bg.size()) throw PreconditionError("potential size does not match grid");
  const TrialSpace space(bg, options.zero_mean);
  Matrix shifted = weighted_operator(bg, form.coeff, form.rpsi);
  if (options.zero_mean) shifted.diagonal().array() += 1.0;
  const Eigen::LDLT<Matrix> precond(shifted);
  if (precond.info() != Eigen::Success) throw NumericalError("preconditioner factorisation failed");

  QuotientResult best;
  best.value = std::numeric_limits<double>::infinity();
  auto consider = [&](Vector u, int start) {
    const double q = descend(bg, form, precond, space, u, options);
    if (q < best.value) {
      best.value = q;
      best.minimizer = std::move(u);
      best.start = start;
    }
  };

  if (!options.zero_mean && options.constant_trial) consider(bg.constant(1.0), -1);
  std::mt19937_64 rng(options.rng_seed);
  for (int i = 0; i < options.random_starts; ++i) consider(random_start(bg, rng, options.zero_mean), i);
  return best;
}

QuotientResult estimate_sobolev_constant(const ReducedBackground& bg, double coeff, const Vector& rpsi,
                                         const QuotientOptions& options) {
  return minimize_sobolev_quotient(bg, QuadraticForm{coeff, rpsi}, options);
}

CoercivityEstimate estimate_coercivity(const ReducedBackground& bg, const Field& rpsi, const Field& btaupsi,
                                       const QuotientOptions& options) {
  CoercivityEstimate est;
  est.lambda_min_h = lowest_eigenvalue(weighted_operator(bg, kConformalCoeff, rpsi.values));
  if (!(est.lambda_min_h > 0.0)) throw RegimeError("coercivity hypothesis violated");

  QuotientOptions opt = options;
  opt.zero_mean = false;
  auto h = estimate_sobolev_constant(bg, kConformalCoeff, rpsi.values, opt);
  est.s_est = h.value;
  est.s_trial = std::move(h.minimizer);
  est.s_trial_start = h.start;
  est.s_prime_est = estimate_sobolev_constant(bg, kKNormCoeff, rpsi.values, opt).value;
  est.R0 = ball_radius(est.s_est, btaupsi.values.cwiseAbs().maxCoeff());
  return est;
}

}  // namespace cid
