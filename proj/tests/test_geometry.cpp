#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <limits>

#include "common.hpp"
#include "cid/coercivity.hpp"

using namespace cid;
using cidtest::desk;
using cidtest::kPi;

namespace {

// Independent 8th-order centred difference on a periodic grid.
Vector fd8_derivative(const Vector& u, double h) {
  static const double c[] = {4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0};
  const int m = int(u.size());
  Vector d(m);
  for (int j = 0; j < m; ++j) {
    double s = 0.0;
    for (int k = 1; k <= 4; ++k) s += c[k - 1] * (u[(j + k) % m] - u[(j - k + m) % m]);
    d[j] = s / h;
  }
  return d;
}

Vector random_band_limited(const ReducedBackground& bg, std::mt19937_64& rng, int kmax) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vector v = bg.constant(n(rng));
  for (int k = 1; k <= kmax; ++k) {
    const double a = n(rng) / k, b = n(rng) / k;
    v += bg.sample([=](double t) { return a * std::cos(k * t) + b * std::sin(k * t); });
  }
  return v;
}

}  // namespace

TEST_CASE("background construction") {
  CHECK(desk(64).volume() == doctest::Approx(8 * kPi * kPi).epsilon(1e-14));
  CHECK(desk(256, 4.0).volume() == doctest::Approx(16 * kPi).epsilon(1e-14));
  CHECK_THROWS_WITH_AS(build_background({15, 1.0}), "M must be even", PreconditionError);
  CHECK_THROWS_AS(build_background({256, -1.0}), PreconditionError);
  CHECK_THROWS_AS(build_background({8, 1.0}), PreconditionError);
}

TEST_CASE("integrate") {
  const auto bg = desk();
  CHECK(integrate(bg, bg.constant(1.0)) == doctest::Approx(4 * kPi * 2 * kPi).epsilon(1e-12));
  CHECK(std::abs(integrate(bg, bg.sample([](double t) { return std::sin(t); }))) < 1e-14);
  CHECK(integrate(bg, bg.sample([](double t) { return std::sin(t) * std::sin(t); })) ==
        doctest::Approx(4 * kPi * kPi).epsilon(1e-13));
  const auto bg4 = desk(128, 4.0);
  CHECK(integrate(bg4, bg4.constant(1.0)) == doctest::Approx(16 * kPi).epsilon(1e-12));
}

TEST_CASE("spectral derivative on resolved modes") {
  const auto bg = desk();
  for (int k : {1, 5, 40, 127}) {
    const Vector u = bg.sample([k](double t) { return std::sin(k * t); });
    const Vector du = bg.sample([k](double t) { return k * std::cos(k * t); });
    CHECK((deriv(bg, u) - du).cwiseAbs().maxCoeff() < 1e-12 * std::max(1, k));
  }
  CHECK(deriv(bg, bg.constant(3.7)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(laplacian(bg, bg.constant(3.7)).cwiseAbs().maxCoeff() == 0.0);
  // Non-2pi circle: d/dtheta sin(2 pi theta / L) = (2 pi / L) cos(...).
  const auto bgl = desk(64, 3.0);
  const double w = 2 * kPi / 3.0;
  const Vector u = bgl.sample([w](double t) { return std::sin(2 * w * t); });
  CHECK((deriv(bgl, u) - bgl.sample([w](double t) { return 2 * w * std::cos(2 * w * t); })).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("derivative of exp(cos) against an 8th-order difference oracle on M = 1024") {
  const auto coarse = desk(256);
  const auto fine = desk(1024);
  auto fn = [](double t) { return std::exp(std::cos(t)); };
  const Vector spectral = deriv(coarse, coarse.sample(fn));
  const Vector fd = fd8_derivative(fine.sample(fn), 2 * kPi / 1024);
  double err = 0.0;
  for (int j = 0; j < 256; ++j) err = std::max(err, std::abs(spectral[j] - fd[4 * j]));
  CHECK(err < 1e-9);
}

TEST_CASE("laplacian eigenpairs and consistency with the first derivative") {
  const auto bg = desk();
  // Rounding in every bin is amplified by up to (M/2)^2: allow 64 eps (M/2)^2.
  const double floor = 64 * std::numeric_limits<double>::epsilon() * 128 * 128;
  const Vector c1 = bg.sample([](double t) { return std::cos(t); });
  CHECK((laplacian(bg, c1) - c1).cwiseAbs().maxCoeff() < floor);
  const Vector c2 = bg.sample([](double t) { return std::cos(2 * t); });
  CHECK((laplacian(bg, c2) - 4 * c2).cwiseAbs().maxCoeff() < floor);

  std::mt19937_64 rng(7);
  const Vector u = random_band_limited(bg, rng, 100);
  const Vector lhs = deriv(bg, deriv(bg, u));
  CHECK((lhs + laplacian(bg, u)).cwiseAbs().maxCoeff() < 1e-9 * laplacian(bg, u).cwiseAbs().maxCoeff());

  // Dense matrices agree with the FFT path.
  const Vector v = random_band_limited(bg, rng, 127);
  CHECK((bg.diff_matrix() * v - deriv(bg, v)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((bg.laplacian_matrix() * v - laplacian(bg, v)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("laplacian matrix spectrum") {
  const auto bg = desk(32, 3.0);
  const Matrix& lap = bg.laplacian_matrix();
  CHECK((lap - lap.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((bg.diff_matrix() + bg.diff_matrix().transpose()).cwiseAbs().maxCoeff() < 1e-13);
  Eigen::SelfAdjointEigenSolver<Matrix> es(lap);
  std::vector<double> expected;
  for (int k = -15; k <= 16; ++k) expected.push_back(std::pow(bg.wave_number(k), 2));
  std::sort(expected.begin(), expected.end());
  for (int i = 0; i < 32; ++i)
    CHECK(es.eigenvalues()[i] == doctest::Approx(expected[i]).epsilon(1e-10).scale(1.0));
  // The grid-scale mode carries (M/2)^2 stiffness, not zero.
  const Vector nyq = bg.nyquist_mode();
  CHECK(((lap * nyq) - std::pow(bg.wave_number(16), 2) * nyq).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(deriv(bg, nyq).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("conformal Killing operator of W = f dtheta") {
  const auto bg = desk();
  const Field c(bg.constant(2.5), Parity::even);
  auto [lt0, ls0] = lw_components(bg, c);
  CHECK(lt0.values.cwiseAbs().maxCoeff() == 0.0);
  CHECK(ls0.values.cwiseAbs().maxCoeff() == 0.0);
  CHECK(lw_norm_sq(bg, c).values.cwiseAbs().maxCoeff() == 0.0);

  const Field s(bg.sample([](double t) { return std::sin(t); }), Parity::odd);
  auto [lt, ls] = lw_components(bg, s);
  const Vector cosv = bg.sample([](double t) { return std::cos(t); });
  CHECK((lt.values - (4.0 / 3.0) * cosv).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((ls.values + (2.0 / 3.0) * cosv).cwiseAbs().maxCoeff() < 1e-13);
  // Trace free on the product metric: ltheta + 2 lsphere = 0.
  CHECK((lt.values + 2 * ls.values).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((lw_norm_sq(bg, s).values - (8.0 / 3.0) * cosv.array().square().matrix()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("integration by parts: int |LW|^2 = -2 int div(LW) . W for 100 random band-limited f") {
  const auto bg = desk();
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Field f(random_band_limited(bg, rng, 60));
    const double lhs = integrate(bg, lw_norm_sq(bg, f));
    const double rhs = -2.0 * inner(bg, vector_laplacian(bg, f).values, f.values);
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("h and k norms") {
  const auto bg = desk();
  const Field two(bg.constant(2.0)), zero(bg.constant(0.0));
  const Field one(bg.constant(1.0));
  const Field s(bg.sample([](double t) { return std::sin(t); }));
  CHECK(h_norm_sq(bg, two, one) == doctest::Approx(16 * kPi * kPi).epsilon(1e-12));
  CHECK(h_norm_sq(bg, zero, s) == doctest::Approx(32 * kPi * kPi).epsilon(1e-12));
  CHECK(k_norm_sq(bg, two, one) == doctest::Approx(16 * kPi * kPi).epsilon(1e-12));
  CHECK(k_norm_sq(bg, zero, s) == doctest::Approx(14 * kPi * kPi).epsilon(1e-12));
  CHECK(k_norm_sq(bg, zero, s) / h_norm_sq(bg, zero, s) == doctest::Approx(7.0 / 16.0).epsilon(1e-13));

  // h-norm bounded below by lambda_min times the L2 norm (eigensolve oracle).
  const Vector rpsi = bg.sample([](double t) { return 2.0 - 0.5 * std::sin(t) * std::sin(t); });
  const double lmin = lowest_eigenvalue(weighted_operator(bg, kConformalCoeff, rpsi));
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Vector u(bg.size());
    for (auto& x : u) x = n(rng);
    const double h = weighted_form(bg, kConformalCoeff, rpsi, u);
    CHECK(h >= lmin * integrate(bg, u.array().square().matrix()) * (1.0 - 1e-10));
    // Quadratic form and dense operator agree.
    CHECK(h == doctest::Approx(bg.node_weight() * u.dot(weighted_operator(bg, kConformalCoeff, rpsi) * u))
                   .epsilon(1e-10));
  }
}

TEST_CASE("parity tags") {
  const auto bg = desk(64);
  const Vector e = bg.sample([](double t) { return std::cos(3 * t) + 0.5; });
  const Vector o = bg.sample([](double t) { return std::sin(2 * t); });
  CHECK(parity_defect(e, Parity::even) < 1e-14);
  CHECK(parity_defect(o, Parity::odd) < 1e-14);
  CHECK(parity_defect(o, Parity::even) > 0.1);
  CHECK(deriv(bg, Field(e, Parity::even)).parity == Parity::odd);
  CHECK(product_parity(Parity::odd, Parity::odd) == Parity::even);
  CHECK(has_parity(deriv(bg, Field(e, Parity::even)), 1e-12));
}
