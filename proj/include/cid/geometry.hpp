#ifndef CID_GEOMETRY_HPP
#define CID_GEOMETRY_HPP

// Discretised background S^1(L) x S^2(1) restricted to fields that are
// invariant under the sphere action. Every field is a periodic function of
// the circle coordinate theta, sampled on a uniform grid theta_j = j L / M.

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "cid/error.hpp"

namespace cid {

inline constexpr int kDimension = 3;
/// Critical Sobolev exponent 2n/(n-2).
inline constexpr int kCritical = 6;
/// Gradient coefficient 4(n-1)/(n-2) of the conformal Laplacian.
inline constexpr double kConformalCoeff = 8.0;
/// Gradient coefficient (3n-2)/(n-1) of the k-norm operator.
inline constexpr double kKNormCoeff = 3.5;

struct GridSpec {
  int num_points = 256;
  double circle_length = 2.0 * std::numbers::pi;
};

/// Throws PreconditionError unless M is even, M >= 16 and L is finite positive.
inline void check_grid(const GridSpec& grid) {
  if (grid.num_points % 2 != 0) throw PreconditionError("M must be even");
  if (grid.num_points < 16) throw PreconditionError("M must be at least 16");
  if (!(grid.circle_length > 0.0) || !std::isfinite(grid.circle_length))
    throw PreconditionError("circle length L must be finite and positive");
}

/// Behaviour under the reflection theta -> -theta (grid index j -> M - j).
enum class Parity { even, odd, none };

constexpr Parity flip(Parity p) {
  switch (p) {
    case Parity::even: return Parity::odd;
    case Parity::odd: return Parity::even;
    default: return Parity::none;
  }
}

inline std::string to_string(Parity p) {
  switch (p) {
    case Parity::even: return "even";
    case Parity::odd: return "odd";
    default: return "none";
  }
}

/// Parity of a pointwise product.
constexpr Parity product_parity(Parity a, Parity b) {
  if (a == Parity::none || b == Parity::none) return Parity::none;
  return a == b ? Parity::even : Parity::odd;
}

template <typename Scalar>
struct BasicField {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector values;
  Parity parity = Parity::none;

  BasicField() = default;
  explicit BasicField(Vector v, Parity p = Parity::none) : values(std::move(v)), parity(p) {}

  Eigen::Index size() const { return values.size(); }
  Scalar operator[](Eigen::Index j) const { return values[j]; }
};

/// Largest violation of the reflection symmetry `p` (0 for Parity::none).
template <typename Derived, typename Scalar = typename Derived::Scalar>
Scalar parity_defect(const Eigen::MatrixBase<Derived>& u, Parity p) {
  if (p == Parity::none) return Scalar(0);
  const Eigen::Index m = u.size();
  const Scalar sign = p == Parity::even ? Scalar(1) : Scalar(-1);
  Scalar worst(0);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::Index mirror = (m - j) % m;
    using std::abs;
    worst = std::max(worst, Scalar(abs(u[j] - sign * u[mirror])));
  }
  if (p == Parity::odd) {
    using std::abs;
    worst = std::max({worst, Scalar(abs(u[0])), Scalar(abs(u[m / 2]))});
  }
  return worst;
}

template <typename Scalar>
bool has_parity(const BasicField<Scalar>& u, Scalar tol) {
  return parity_defect(u.values, u.parity) <= tol;
}

/// Background geometry with Fourier collocation operators.
///
/// The differentiation matrix is the periodic sinc-interpolant derivative with
/// the Nyquist mode dropped, so it is exactly antisymmetric. The Laplacian
/// (positive-spectrum convention, -d^2/dtheta^2) is the Fourier second-derivative
/// matrix: it agrees with -D*D on resolved modes and gives the grid-scale mode
/// its k^2 stiffness instead of leaving it in the kernel. Integrals use the
/// trapezoid rule on the circle times the unit-sphere area 4 pi.
template <typename Scalar>
class BasicBackground {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  explicit BasicBackground(const GridSpec& grid) : grid_(grid) {
    check_grid(grid);
    const int m = grid.num_points;
    const Scalar length(grid.circle_length);
    const Scalar pi = std::numbers::pi_v<Scalar>;
    nodes_.resize(m);
    for (int j = 0; j < m; ++j) nodes_[j] = length * Scalar(j) / Scalar(m);

    diff_.setZero(m, m);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        if (i == j) continue;
        const int d = i - j;
        const Scalar sign = (d % 2 == 0) ? Scalar(1) : Scalar(-1);
        using std::tan;
        diff_(i, j) = (pi / length) * sign / tan(pi * Scalar(d) / Scalar(m));
      }
    }
    const Scalar h = Scalar(2) * pi / Scalar(m);
    const Scalar scale = (Scalar(2) * pi / length) * (Scalar(2) * pi / length);
    lap_.resize(m, m);
    // Off-diagonal entries in closed form; the diagonal is minus the row sum,
    // so constants are annihilated to rounding.
    for (int i = 0; i < m; ++i) {
      Scalar row = 0;
      for (int j = 0; j < m; ++j) {
        if (i == j) continue;
        const int d = i - j;
        const Scalar sign = (d % 2 == 0) ? Scalar(1) : Scalar(-1);
        using std::sin;
        const Scalar sn = sin(Scalar(d) * h / Scalar(2));
        lap_(i, j) = scale * sign / (Scalar(2) * sn * sn);
        row += lap_(i, j);
      }
      lap_(i, i) = -row;
    }
    weight_ = Scalar(4) * pi * length / Scalar(m);
  }

  const GridSpec& grid() const { return grid_; }
  int size() const { return grid_.num_points; }
  Scalar circle_length() const { return Scalar(grid_.circle_length); }
  Scalar scal() const { return Scalar(2); }
  Scalar sphere_area() const { return Scalar(4) * std::numbers::pi_v<Scalar>; }
  Scalar volume() const { return sphere_area() * circle_length(); }
  /// Quadrature weight of one node for manifold integrals (includes 4 pi).
  Scalar node_weight() const { return weight_; }

  const Vector& nodes() const { return nodes_; }
  const Matrix& diff_matrix() const { return diff_; }
  const Matrix& laplacian_matrix() const { return lap_; }

  /// Wave number of Fourier mode k on this circle.
  Scalar wave_number(int k) const {
    return Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(k) / circle_length();
  }

  template <typename Fn>
  Vector sample(Fn&& fn) const {
    Vector out(size());
    for (int j = 0; j < size(); ++j) out[j] = fn(nodes_[j]);
    return out;
  }

  Vector constant(Scalar c) const { return Vector::Constant(size(), c); }

  /// The grid-scale mode (-1)^j, invisible to the differentiation matrix.
  Vector nyquist_mode() const {
    Vector v(size());
    for (int j = 0; j < size(); ++j) v[j] = (j % 2 == 0) ? Scalar(1) : Scalar(-1);
    return v;
  }

 private:
  GridSpec grid_;
  Vector nodes_;
  Matrix diff_;
  Matrix lap_;
  Scalar weight_{};
};

using ReducedBackground = BasicBackground<double>;
using Field = BasicField<double>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline ReducedBackground build_background(const GridSpec& grid) { return ReducedBackground(grid); }

namespace detail {

// Multiplies Fourier mode k by symbol(omega_k); the Nyquist mode is dropped unless
// keep_nyquist. Same operators as the dense matrices. The symbol must vanish at
// zero, so the mean is removed first: rounding then scales with the oscillation
// of u rather than its size, and constants map to exact zeros.
template <typename Scalar, typename Derived, typename Symbol>
typename BasicBackground<Scalar>::Vector spectral_apply(const BasicBackground<Scalar>& bg,
                                                        const Eigen::MatrixBase<Derived>& u, Symbol symbol,
                                                        bool keep_nyquist) {
  if (u.size() != bg.size()) throw PreconditionError("field size does not match grid");
  const int m = bg.size();
  const Scalar shift = u.mean();
  std::vector<Scalar> time(m);
  for (int j = 0; j < m; ++j) time[j] = u[j] - shift;
  std::vector<std::complex<Scalar>> freq;
  Eigen::FFT<Scalar> fft;
  fft.fwd(freq, time);
  for (int k = 0; k < m; ++k) {
    const int wave = k <= m / 2 ? k : k - m;
    const bool nyquist = 2 * wave == m;
    freq[k] = nyquist && !keep_nyquist ? std::complex<Scalar>(0) : freq[k] * symbol(bg.wave_number(wave));
  }
  fft.inv(time, freq);
  return Eigen::Map<typename BasicBackground<Scalar>::Vector>(time.data(), m);
}

}  // namespace detail

template <typename Scalar, typename Derived>
typename BasicBackground<Scalar>::Vector deriv(const BasicBackground<Scalar>& bg,
                                               const Eigen::MatrixBase<Derived>& u) {
  const typename BasicBackground<Scalar>::Vector v = u;
  return detail::spectral_apply(bg, v, [](Scalar w) { return std::complex<Scalar>(0, w); }, false);
}

template <typename Scalar>
BasicField<Scalar> deriv(const BasicBackground<Scalar>& bg, const BasicField<Scalar>& u) {
  return BasicField<Scalar>(deriv(bg, u.values), flip(u.parity));
}

/// Positive-spectrum Laplacian: returns -u''.
template <typename Scalar, typename Derived>
typename BasicBackground<Scalar>::Vector laplacian(const BasicBackground<Scalar>& bg,
                                                   const Eigen::MatrixBase<Derived>& u) {
  const typename BasicBackground<Scalar>::Vector v = u;
  return detail::spectral_apply(bg, v, [](Scalar w) { return std::complex<Scalar>(w * w); }, true);
}

template <typename Scalar>
BasicField<Scalar> laplacian(const BasicBackground<Scalar>& bg, const BasicField<Scalar>& u) {
  return BasicField<Scalar>(laplacian(bg, u.values), u.parity);
}

/// Integral over the manifold of a sphere-invariant function.
template <typename Scalar, typename Derived>
Scalar integrate(const BasicBackground<Scalar>& bg, const Eigen::MatrixBase<Derived>& u) {
  if (u.size() != bg.size()) throw PreconditionError("field size does not match grid");
  return bg.node_weight() * u.sum();
}

template <typename Scalar>
Scalar integrate(const BasicBackground<Scalar>& bg, const BasicField<Scalar>& u) {
  return integrate(bg, u.values);
}

template <typename Scalar, typename DerivedA, typename DerivedB>
Scalar inner(const BasicBackground<Scalar>& bg, const Eigen::MatrixBase<DerivedA>& u,
             const Eigen::MatrixBase<DerivedB>& v) {
  return bg.node_weight() * u.dot(v);
}

template <typename Scalar, typename Derived>
Scalar mean(const BasicBackground<Scalar>& bg, const Eigen::MatrixBase<Derived>& u) {
  return integrate(bg, u) / bg.volume();
}

/// (int |u|^p dmu)^(1/p).
template <typename Scalar, typename Derived>
Scalar lp_norm(const BasicBackground<Scalar>& bg, const Eigen::MatrixBase<Derived>& u, Scalar p) {
  using std::pow;
  return pow(integrate(bg, u.cwiseAbs().array().pow(p).matrix()), Scalar(1) / p);
}

/// Components of the conformal Killing operator applied to W = f dtheta:
/// the dtheta^2 coefficient (4/3) f' and the unit-sphere-metric coefficient -(2/3) f'.
template <typename Scalar>
std::pair<BasicField<Scalar>, BasicField<Scalar>> lw_components(const BasicBackground<Scalar>& bg,
                                                                 const BasicField<Scalar>& f) {
  const auto df = deriv(bg, f);
  return {BasicField<Scalar>(Scalar(4) / Scalar(3) * df.values, df.parity),
          BasicField<Scalar>(Scalar(-2) / Scalar(3) * df.values, df.parity)};
}

/// Pointwise |LW|^2 = (4/3 f')^2 + 2 (2/3 f')^2 = (8/3) f'^2.
template <typename Scalar>
BasicField<Scalar> lw_norm_sq(const BasicBackground<Scalar>& bg, const BasicField<Scalar>& f) {
  const auto df = deriv(bg, f.values);
  return BasicField<Scalar>(Scalar(8) / Scalar(3) * df.array().square().matrix(),
                            f.parity == Parity::none ? Parity::none : Parity::even);
}

/// Reduced vector Laplacian div(LW) for W = f dtheta: (4/3) f''.
template <typename Scalar>
BasicField<Scalar> vector_laplacian(const BasicBackground<Scalar>& bg, const BasicField<Scalar>& f) {
  return BasicField<Scalar>(Scalar(-4) / Scalar(3) * laplacian(bg, f.values), f.parity);
}

/// int (coeff |du|^2 + rpsi u^2) dmu, with the gradient term taken as u Lap u
/// (equal to |du|^2 on resolved modes) so the form matches weighted_operator.
template <typename Scalar, typename DerivedR, typename DerivedU>
Scalar weighted_form(const BasicBackground<Scalar>& bg, Scalar coeff,
                     const Eigen::MatrixBase<DerivedR>& rpsi, const Eigen::MatrixBase<DerivedU>& u) {
  const auto lu = laplacian(bg, u);
  return bg.node_weight() * (coeff * u.dot(lu) + (rpsi.array() * u.array().square()).sum());
}

template <typename Scalar>
Scalar h_norm_sq(const BasicBackground<Scalar>& bg, const BasicField<Scalar>& rpsi,
                 const BasicField<Scalar>& u) {
  return weighted_form(bg, Scalar(kConformalCoeff), rpsi.values, u.values);
}

template <typename Scalar>
Scalar k_norm_sq(const BasicBackground<Scalar>& bg, const BasicField<Scalar>& rpsi,
                 const BasicField<Scalar>& u) {
  return weighted_form(bg, Scalar(kKNormCoeff), rpsi.values, u.values);
}

/// Dense matrix of coeff * Laplacian + diag(rpsi).
template <typename Scalar, typename Derived>
typename BasicBackground<Scalar>::Matrix weighted_operator(const BasicBackground<Scalar>& bg, Scalar coeff,
                                                           const Eigen::MatrixBase<Derived>& rpsi) {
  typename BasicBackground<Scalar>::Matrix op = coeff * bg.laplacian_matrix();
  op.diagonal() += rpsi;
  return op;
}

}  // namespace cid

#endif  // CID_GEOMETRY_HPP
