#include "cid/seed.hpp"

#include <cmath>

#include "cid/coercivity.hpp"

namespace cid {

double Potential::operator()(double x) const {
  double v = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) v = v * x + *it;
  return v;
}

double Potential::derivative(double x) const {
  double v = 0.0;
  for (std::size_t k = coeffs.size(); k-- > 1;) v = v * x + static_cast<double>(k) * coeffs[k];
  return v;
}

Field sample_even(const ReducedBackground& bg, const FourierSpec& spec, const std::string& name) {
  for (double s : spec.sin) {
    if (s != 0.0) throw PreconditionError("parity violation: " + name + " has sine coefficients");
  }
  const int modes = static_cast<int>(spec.cos.size());
  if (modes >= bg.size() / 2) throw PreconditionError("unresolved mode in " + name);
  Vector v = bg.constant(spec.mean);
  const double omega = bg.wave_number(1);
  for (int k = 1; k <= modes; ++k) {
    const double c = spec.cos[k - 1];
    if (c == 0.0) continue;
    for (int j = 0; j < bg.size(); ++j) v[j] += c * std::cos(omega * k * bg.nodes()[j]);
  }
  // Symmetrise so the reflection invariance is exact in floating point.
  Vector sym = v;
  for (int j = 1; j < bg.size(); ++j) sym[j] = 0.5 * (v[j] + v[bg.size() - j]);
  return Field(std::move(sym), Parity::even);
}

SeedData build_seed(const ReducedBackground& bg, const SeedConfig& config) {
  if (config.potential.coeffs.size() > 9) throw PreconditionError("potential degree must be at most 8");
  if (!std::isfinite(config.sigma_amp)) throw PreconditionError("sigma_amp must be finite");
  SeedData seed;
  seed.tau = sample_even(bg, config.tau, "tau");
  seed.psi = sample_even(bg, config.psi, "psi");
  seed.pi = sample_even(bg, config.pi, "pi");
  seed.sigma_amp = config.sigma_amp;
  seed.potential = config.potential;
  return seed;
}

LichCoefficients coefficients(const ReducedBackground& bg, const SeedData& seed) {
  const Vector dpsi = deriv(bg, seed.psi.values);
  const Parity par = product_parity(seed.tau.parity, seed.psi.parity) == Parity::none ? Parity::none : Parity::even;
  LichCoefficients c;
  c.rpsi = Field((bg.scal() - dpsi.array().square()).matrix(), seed.psi.parity == Parity::none ? Parity::none : Parity::even);
  Vector b(bg.size());
  for (int j = 0; j < bg.size(); ++j) {
    const double t = seed.tau[j];
    b[j] = -(2.0 / 3.0) * t * t + 2.0 * seed.potential(seed.psi[j]);
  }
  c.b_minus = Field(b.cwiseMin(0.0), par);
  c.b_plus = Field(b.cwiseMax(0.0), par);
  c.sup_abs_b = b.cwiseAbs().maxCoeff();
  c.btaupsi = Field(std::move(b), par);
  return c;
}

SeedData scale_data(const SeedData& seed, double factor) {
  SeedData out = seed;
  out.sigma_amp *= factor;
  out.pi.values *= factor;
  return out;
}

double seed_source_integral(const ReducedBackground& bg, const SeedData& seed) {
  return sigma_norm_sq(seed.sigma_amp) * bg.volume() + integrate(bg, seed.pi.values.array().square().matrix());
}

ValidationReport validate(const ReducedBackground& bg, const SeedData& seed, double parity_tol) {
  ValidationReport r;
  r.parity_ok = true;
  for (const auto& [name, field] : {std::pair<const char*, const Field*>{"tau", &seed.tau},
                                    {"psi", &seed.psi},
                                    {"pi", &seed.pi}}) {
    if (field->size() != bg.size()) {
      r.parity_ok = false;
      r.failures.push_back(std::string("shape: ") + name);
      continue;
    }
    if (field->parity != Parity::even || parity_defect(field->values, Parity::even) > parity_tol) {
      r.parity_ok = false;
      r.failures.push_back(std::string("parity: ") + name + " must be even");
    }
  }
  if (!r.parity_ok) return r;

  const auto coeffs = coefficients(bg, seed);
  r.min_rpsi = coeffs.rpsi.values.minCoeff();
  r.lambda_min_h = lowest_eigenvalue(weighted_operator(bg, kConformalCoeff, coeffs.rpsi.values));
  r.coercive_by_positivity = r.min_rpsi > 0.0;
  r.coercive_by_eigenvalue = r.lambda_min_h > 0.0;
  if (!r.coercive_by_eigenvalue) r.failures.push_back("coercivity violated");
  r.passed = r.parity_ok && r.coercive_by_eigenvalue;
  return r;
}

}  // namespace cid
