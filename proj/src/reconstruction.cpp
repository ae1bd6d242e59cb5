#include "cid/reconstruction.hpp"

#include <cmath>

namespace cid {
namespace {

constexpr double kN = kCritical;

}  // namespace

PhysicalData reconstruct(const ReducedBackground& bg, const SeedData& seed, const Field& phi, const Field& f) {
  if (phi.size() != bg.size() || f.size() != bg.size()) throw PreconditionError("field size does not match grid");
  if (!(phi.values.minCoeff() > 0.0)) throw PreconditionError("nonpositive phi");
  const auto p = phi.values.array();
  const Vector df_v = deriv(bg, f.values);
  const auto df = df_v.array();
  const auto tau = seed.tau.values.array();
  const Vector p4 = p.pow(kN - 2.0).matrix();
  const Vector pm2 = p.pow(-2.0).matrix();

  PhysicalData d;
  d.ghat_theta = Field(p4, Parity::even);
  d.ghat_sphere = Field(p4, Parity::even);
  d.K_theta = Field((tau / 3.0 * p4.array() + pm2.array() * (2.0 * seed.sigma_amp + (4.0 / 3.0) * df)).matrix());
  d.K_sphere = Field((tau / 3.0 * p4.array() - pm2.array() * (seed.sigma_amp + (2.0 / 3.0) * df)).matrix());
  d.psi_hat = seed.psi;
  d.pi_hat = Field((p.pow(-kN) * seed.pi.values.array()).matrix(), seed.pi.parity);
  d.tau = seed.tau;
  if (trace_defect(d).cwiseAbs().maxCoeff() > 1e-9) throw NumericalError("trace identity violated");
  return d;
}

Vector trace_defect(const PhysicalData& d) {
  return (d.K_theta.values.array() / d.ghat_theta.values.array() +
          2.0 * d.K_sphere.values.array() / d.ghat_sphere.values.array() - d.tau.values.array())
      .matrix();
}

PhysicalResiduals physical_residuals(const ReducedBackground& bg, const PhysicalData& d, const Potential& potential) {
  const int m = bg.size();
  const Vector a = d.ghat_theta.values.cwiseSqrt();
  const Vector b = d.ghat_sphere.values.cwiseSqrt();
  const Vector db = deriv(bg, b);
  const Vector b_r = db.cwiseQuotient(a);
  const Vector b_rr = deriv(bg, b_r).cwiseQuotient(a);
  const Vector k1 = d.K_theta.values.cwiseQuotient(d.ghat_theta.values);
  const Vector k2 = d.K_sphere.values.cwiseQuotient(d.ghat_sphere.values);
  const Vector dk1 = deriv(bg, k1);
  const Vector trace = k1 + 2.0 * k2;
  const Vector dtrace = deriv(bg, trace);
  const Vector dpsi = deriv(bg, d.psi_hat.values);

  PhysicalResiduals out;
  out.hamiltonian.resize(m);
  out.momentum.resize(m);
  for (int j = 0; j < m; ++j) {
    const double scal = 2.0 * (1.0 - b_r[j] * b_r[j]) / (b[j] * b[j]) - 4.0 * b_rr[j] / b[j];
    const double k_sq = k1[j] * k1[j] + 2.0 * k2[j] * k2[j];
    const double grad_psi_sq = dpsi[j] * dpsi[j] / (a[j] * a[j]);
    out.hamiltonian[j] = scal + trace[j] * trace[j] - k_sq - d.pi_hat.values[j] * d.pi_hat.values[j] - grad_psi_sq -
                         2.0 * potential(d.psi_hat.values[j]);
    out.momentum[j] = dk1[j] + 2.0 * (db[j] / b[j]) * (k1[j] - k2[j]) - dtrace[j] +
                      d.pi_hat.values[j] * dpsi[j];
  }
  return out;
}

ConformalResiduals conformal_residuals(const ReducedBackground& bg, const SeedData& seed, const Field& phi,
                                       const Field& f) {
  if (!(phi.values.minCoeff() > 0.0)) throw PreconditionError("nonpositive phi");
  const auto coeffs = coefficients(bg, seed);
  ConformalResiduals out;
  out.lich = lichnerowicz_residual(bg, coeffs, momentum_density(bg, seed, f), phi.values);
  out.vec = vector_residual(bg, seed, phi, f);
  return out;
}

ResidualReport residual_report(const ReducedBackground& bg, const SeedData& seed, const Field& phi, const Field& f) {
  const auto conf = conformal_residuals(bg, seed, phi, f);
  const auto phys = physical_residuals(bg, reconstruct(bg, seed, phi, f), seed.potential);
  ResidualReport r;
  r.hamiltonian_sup = phys.hamiltonian.cwiseAbs().maxCoeff();
  r.momentum_sup = phys.momentum.cwiseAbs().maxCoeff();
  r.conformal_lich_sup = conf.lich.cwiseAbs().maxCoeff();
  r.conformal_vec_sup = conf.vec.cwiseAbs().maxCoeff();
  r.obstruction = std::abs(vector_rhs(bg, seed, phi).values.mean()) * bg.volume();
  return r;
}

}  // namespace cid
