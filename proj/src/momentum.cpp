#include "cid/momentum.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <vector>

namespace cid {

Field vector_rhs(const ReducedBackground& bg, const SeedData& seed, const Field& phi, double coupling) {
  if (phi.size() != bg.size()) throw PreconditionError("phi size does not match grid");
  if (!(phi.values.minCoeff() > 0.0)) throw PreconditionError("nonpositive phi");
  const Vector dtau = deriv(bg, seed.tau.values);
  const Vector dpsi = deriv(bg, seed.psi.values);
  Vector rhs = coupling * (2.0 / 3.0) * phi.values.array().pow(kCritical).cwiseProduct(dtau.array()).matrix() -
               seed.pi.values.cwiseProduct(dpsi);
  const Parity a = product_parity(phi.parity, flip(seed.tau.parity));
  const Parity b = product_parity(seed.pi.parity, flip(seed.psi.parity));
  return Field(std::move(rhs), a == b ? a : Parity::none);
}

Field vector_rhs(const ReducedBackground& bg, const SeedData& seed, const Field& phi) {
  return vector_rhs(bg, seed, phi, 1.0);
}

VectorSolve solve_vector(const ReducedBackground& bg, const Field& rhs, bool strict) {
  if (rhs.size() != bg.size()) throw PreconditionError("rhs size does not match grid");
  const int m = bg.size();
  const double avg = rhs.values.mean();
  VectorSolve out;
  out.obstruction = std::abs(avg) * bg.volume();
  if (strict && out.obstruction > kObstructionTol)
    throw RegimeError("obstruction above tolerance: " + std::to_string(out.obstruction));

  Eigen::FFT<double> fft;
  std::vector<double> time(rhs.values.data(), rhs.values.data() + m);
  std::vector<std::complex<double>> freq;
  fft.fwd(freq, time);
  for (int k = 0; k < m; ++k) {
    const int wave = k <= m / 2 ? k : k - m;
    if (wave == 0) {
      freq[k] = 0.0;
      continue;
    }
    const double omega = bg.wave_number(wave);
    freq[k] /= -(4.0 / 3.0) * omega * omega;
  }
  std::vector<double> back;
  fft.inv(back, freq);
  Vector f = Eigen::Map<Vector>(back.data(), m);

  const Vector projected = (rhs.values.array() - avg).matrix();
  out.residual = (-(4.0 / 3.0) * laplacian(bg, f) - projected).cwiseAbs().maxCoeff();
  out.f = Field(std::move(f), rhs.parity);
  return out;
}

Vector vector_residual(const ReducedBackground& bg, const SeedData& seed, const Field& phi, const Field& f,
                       double coupling) {
  return vector_laplacian(bg, f).values - vector_rhs(bg, seed, phi, coupling).values;
}

QuotientResult estimate_gamma(const ReducedBackground& bg, const QuotientOptions& options) {
  QuotientOptions opt = options;
  opt.zero_mean = true;
  return minimize_sobolev_quotient(bg, QuadraticForm{8.0 / 3.0, bg.constant(0.0)}, opt);
}

}  // namespace cid
