#ifndef CID_RECONSTRUCTION_HPP
#define CID_RECONSTRUCTION_HPP

#include "cid/lichnerowicz.hpp"
#include "cid/momentum.hpp"

namespace cid {

/// Physical data ghat = phi^4 g, Khat = (tau/3) ghat + phi^-2 (sigma + LW),
/// psihat = psi, pihat = phi^-6 pi. Tensors are diagonal: the "theta" entry is
/// the d theta^2 coefficient, the "sphere" entry multiplies the round metric.
struct PhysicalData {
  Field ghat_theta;
  Field ghat_sphere;
  Field K_theta;
  Field K_sphere;
  Field psi_hat;
  Field pi_hat;
  Field tau;  // kept for the trace identity
};

struct ResidualReport {
  double hamiltonian_sup = 0.0;
  double momentum_sup = 0.0;
  double conformal_lich_sup = 0.0;
  double conformal_vec_sup = 0.0;
  double obstruction = 0.0;
};

/// Throws PreconditionError("nonpositive phi"), and NumericalError if the
/// reconstructed trace differs from tau by more than 1e-9.
PhysicalData reconstruct(const ReducedBackground& bg, const SeedData& seed, const Field& phi, const Field& f);

/// tr_ghat Khat - tau pointwise.
Vector trace_defect(const PhysicalData& data);

struct PhysicalResiduals {
  Vector hamiltonian;  // Scal + (tr K)^2 - |K|^2 - pihat^2 - |dpsihat|^2 - 2 V(psihat)
  Vector momentum;     // (div K - d tr K + pihat dpsihat)_theta
};

/// Evaluates the constraints on ghat = a^2 dtheta^2 + b^2 g_S2 from the
/// warped-product curvature of that metric class, not from the conformal
/// transformation law: with r the ghat-arclength along theta,
///   Scal = 2 (1 - b_r^2) / b^2 - 4 b_rr / b,
///   (div K)_theta = k1' + 2 (b'/b)(k1 - k2),  k1 = K^theta_theta, k2 = K^s_s.
PhysicalResiduals physical_residuals(const ReducedBackground& bg, const PhysicalData& data,
                                     const Potential& potential);

struct ConformalResiduals {
  Vector lich;
  Vector vec;
};

/// Pointwise residuals of the reduced Lichnerowicz and vector equations.
ConformalResiduals conformal_residuals(const ReducedBackground& bg, const SeedData& seed, const Field& phi,
                                       const Field& f);

/// Both residual families and the obstruction |mean(rhs)| vol on one state.
ResidualReport residual_report(const ReducedBackground& bg, const SeedData& seed, const Field& phi, const Field& f);

}  // namespace cid

#endif  // CID_RECONSTRUCTION_HPP
