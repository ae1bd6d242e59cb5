#ifndef CID_CERTIFICATES_HPP
#define CID_CERTIFICATES_HPP

#include <string>
#include <vector>

#include "cid/lichnerowicz.hpp"

namespace cid {

/// Moser-type bound chain. Level i bounds ||phi||_{L^(N q_i)} by R_i; the step
/// i -> i+1 multiplies the Lichnerowicz equation by phi^(N+1+2k_i).
/// All bounds are empirical: s_i and C_i are computed from the run.
struct CertificateChain {
  std::vector<long long> q;  // q_0 .. q_depth, q_i = 1 + (N/2)^i
  std::vector<long long> k;  // k_0 .. k_{depth-1}, k_i = (N/2)(q_i - 2)
  std::vector<double> x_list;  // x_i = 2k_i / (N k_i + N(N/2 - 1)); x_0 = 0 (unused)
  std::vector<double> s_list;  // s_0 = s', s_i from the k_i-weighted quotient
  std::vector<double> C_list;  // ||A_W||_{L^(q_i/2)}, i >= 1 (C_0 = int A_W)
  std::vector<double> R_list;  // R_0 .. R_depth
  double R = 0.0;              // input bound on int phi^(2N)
};

/// q_i and k_i by integer recursion (no floating point).
std::vector<long long> moser_exponents(int depth);
std::vector<long long> moser_weights(int depth);

/// Gradient coefficient 8 (N+1+2k) / (N/2+1+k)^2 after substituting u = phi^(N/2+1+k).
double moser_gradient_coeff(long long k);

/// Throws PreconditionError unless 1 <= depth <= 4; NumericalError("chain
/// infeasible") if a level has no finite bound.
CertificateChain moser_chain(const ReducedBackground& bg, const LichCoefficients& coeffs,
                             const MomentumDensity& density, double s_prime, double R, int depth = 3,
                             const QuotientOptions& options = {});

struct LowerBoundCert {
  double green_min = 0.0;
  double eta = 0.0;
  double theta = 0.0;  // effective theta of the subsolution (safety included)
};

/// Minimum over the discrete Green kernel of 8 Lap + R_psi against the measure,
/// G_ij = (op^-1)_ij / w. Throws RegimeError("nonpositive Green kernel").
double green_lower_bound(const ReducedBackground& bg, const Field& rpsi);

/// Discrete Green kernel itself.
Matrix green_kernel(const ReducedBackground& bg, const Field& rpsi);

/// eta = (green_min theta / 2) int (|sigma|^2 + pi^2).
double eta_bound(const SubsolutionCert& cert, double green_min, double source_integral);

LowerBoundCert lower_bound_cert(const ReducedBackground& bg, const LichCoefficients& coeffs,
                                const SubsolutionCert& cert, double source_integral);

struct Audit {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool passed = false;
};

/// ||phi||_{L^(N q_i)} <= R_i for every level.
std::vector<Audit> audit_chain(const ReducedBackground& bg, const CertificateChain& chain, const Field& phi);

/// Exact pointwise checks phi_sub <= phi <= phi_sup and min phi >= eta.
std::vector<Audit> audit_bracketing(const LichSolution& sol, double eta);

}  // namespace cid

#endif  // CID_CERTIFICATES_HPP
