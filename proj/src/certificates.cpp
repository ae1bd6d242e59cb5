#include "cid/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cid {
namespace {

constexpr long long kNi = kCritical;
constexpr double kN = kCritical;

// Largest Y with s Y^(2/N) <= b Y^x + c, for 0 <= x < 2/N.
double largest_root(double s, double b, double x, double c) {
  auto h = [&](double y) { return s * std::pow(y, 2.0 / kN) - b * std::pow(y, x) - c; };
  if (!(s > 0.0) || !(x < 2.0 / kN) || !std::isfinite(b) || !std::isfinite(c))
    throw NumericalError("chain infeasible");
  double hi = 1.0;
  while (h(hi) <= 0.0) {
    hi *= 2.0;
    if (!std::isfinite(hi)) throw NumericalError("chain infeasible");
  }
  double lo = 0.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (h(mid) <= 0.0 ? lo : hi) = mid;
  }
  return hi;
}

}  // namespace

std::vector<long long> moser_exponents(int depth) {
  std::vector<long long> q{2};
  for (int i = 0; i < depth; ++i) q.push_back((kNi / 2) * (q.back() - 1) + 1);
  return q;
}

std::vector<long long> moser_weights(int depth) {
  const auto q = moser_exponents(depth);
  std::vector<long long> k;
  for (int i = 0; i < depth; ++i) k.push_back((kNi / 2) * (q[i] - 2));
  return k;
}

double moser_gradient_coeff(long long k) {
  const double kk = static_cast<double>(k);
  const double p = kN / 2.0 + 1.0 + kk;
  return kConformalCoeff * (kN + 1.0 + 2.0 * kk) / (p * p);
}

CertificateChain moser_chain(const ReducedBackground& bg, const LichCoefficients& coeffs,
                             const MomentumDensity& density, double s_prime, double R, int depth,
                             const QuotientOptions& options) {
  if (depth < 1 || depth > 4) throw PreconditionError("depth must be between 1 and 4");
  if (!(R > 0.0) || !(s_prime > 0.0)) throw PreconditionError("R and s' must be positive");
  CertificateChain ch;
  ch.R = R;
  ch.q = moser_exponents(depth);
  ch.k = moser_weights(depth);
  const double sup_b = coeffs.sup_abs_b;

  // Level 0 from the stable set; level 1 from the k-norm estimate of u = phi^4:
  // s' (int phi^24)^(1/3) <= int B phi^12 + int A_W.
  ch.R_list.push_back(std::pow(R, 1.0 / (2.0 * kN)));
  ch.x_list.push_back(0.0);
  ch.s_list.push_back(s_prime);
  ch.C_list.push_back(density.integral_a);
  const double y1 = std::pow((sup_b * R + density.integral_a) / s_prime, kN / 2.0);
  if (!std::isfinite(y1)) throw NumericalError("chain infeasible");
  ch.R_list.push_back(std::pow(y1, 1.0 / (kN * ch.q[1])));

  for (int i = 1; i < depth; ++i) {
    const double k = static_cast<double>(ch.k[i]);
    const double q = static_cast<double>(ch.q[i]);
    const double x = 2.0 * k / (kN * k + kN * (kN / 2.0 - 1.0));
    const double s_i = estimate_sobolev_constant(bg, moser_gradient_coeff(ch.k[i]), coeffs.rpsi.values, options).value;
    const double c_i = lp_norm(bg, density.a_w.values, q / 2.0);
    // int B phi^(N q_i) <= sup|B| R^(1-x) Y^x by interpolation between L^(2N) and
    // L^(N q_{i+1}); int A phi^(2k) <= C_i R_i^(N (q_i - 2)) by Hoelder.
    const double source = c_i * std::pow(ch.R_list[i], kN * (q - 2.0));
    const double y = largest_root(s_i, sup_b * std::pow(R, 1.0 - x), x, source);
    ch.x_list.push_back(x);
    ch.s_list.push_back(s_i);
    ch.C_list.push_back(c_i);
    ch.R_list.push_back(std::pow(y, 1.0 / (kN * static_cast<double>(ch.q[i + 1]))));
  }
  return ch;
}

Matrix green_kernel(const ReducedBackground& bg, const Field& rpsi) {
  const Matrix op = weighted_operator(bg, kConformalCoeff, rpsi.values);
  const Eigen::LLT<Matrix> llt(op);
  if (llt.info() != Eigen::Success) throw RegimeError("not coercive");
  return llt.solve(Matrix::Identity(bg.size(), bg.size())) / bg.node_weight();
}

double green_lower_bound(const ReducedBackground& bg, const Field& rpsi) {
  const double g = green_kernel(bg, rpsi).minCoeff();
  if (!(g > 0.0)) throw RegimeError("nonpositive Green kernel");
  return g;
}

double eta_bound(const SubsolutionCert& cert, double green_min, double source_integral) {
  if (green_min < 0.0 || source_integral < 0.0) throw PreconditionError("eta inputs must be nonnegative");
  return 0.5 * green_min * cert.effective_theta() * source_integral;
}

LowerBoundCert lower_bound_cert(const ReducedBackground& bg, const LichCoefficients& coeffs,
                                const SubsolutionCert& cert, double source_integral) {
  LowerBoundCert lb;
  lb.green_min = green_lower_bound(bg, coeffs.rpsi);
  lb.theta = cert.effective_theta();
  lb.eta = eta_bound(cert, lb.green_min, source_integral);
  return lb;
}

std::vector<Audit> audit_chain(const ReducedBackground& bg, const CertificateChain& chain, const Field& phi) {
  std::vector<Audit> out;
  for (std::size_t i = 0; i < chain.R_list.size(); ++i) {
    const double p = kN * static_cast<double>(chain.q[i]);
    Audit a;
    a.name = "L" + std::to_string(static_cast<long long>(p)) + " norm <= R_" + std::to_string(i);
    a.value = lp_norm(bg, phi.values, p);
    a.bound = chain.R_list[i];
    a.passed = a.value <= a.bound;
    out.push_back(a);
  }
  return out;
}

std::vector<Audit> audit_bracketing(const LichSolution& sol, double eta) {
  const Vector& phi = sol.phi.values;
  Audit sub{"phi_sub <= phi", (sol.phi_sub.values - phi).maxCoeff(), 0.0, false};
  sub.passed = (sol.phi_sub.values.array() <= phi.array()).all();
  Audit sup{"phi <= phi_sup", (phi - sol.phi_sup.values).maxCoeff(), 0.0, false};
  sup.passed = (phi.array() <= sol.phi_sup.values.array()).all();
  Audit low{"min phi >= eta", phi.minCoeff(), eta, false};
  low.passed = phi.minCoeff() >= eta;
  return {sub, sup, low};
}

}  // namespace cid
