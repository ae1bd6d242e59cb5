#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "common.hpp"
#include "cid/coercivity.hpp"

using namespace cid;
using cidtest::desk;
using cidtest::kPi;

TEST_CASE("seed construction") {
  const auto bg = desk();
  const SeedData s = build_seed(bg, cidtest::benchmark_seed());
  const Vector tau = bg.sample([](double t) { return 1.0 + 2.0 * std::cos(t); });
  CHECK((s.tau.values - tau).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(s.tau.parity == Parity::even);
  CHECK(s.psi.parity == Parity::even);
  CHECK(s.pi.parity == Parity::even);
  CHECK(parity_defect(s.tau.values, Parity::even) == 0.0);

  SeedConfig bad = cidtest::benchmark_seed();
  bad.tau.cos.assign(128, 0.0);
  bad.tau.cos.back() = 1.0;  // mode M/2
  CHECK_THROWS_WITH_AS(build_seed(bg, bad), doctest::Contains("unresolved mode"), PreconditionError);
  SeedConfig odd = cidtest::benchmark_seed();
  odd.psi.sin = {0.3};
  CHECK_THROWS_WITH_AS(build_seed(bg, odd), doctest::Contains("parity violation"), PreconditionError);
}

TEST_CASE("Lichnerowicz coefficients") {
  const auto bg = desk();
  const auto c0 = coefficients(bg, build_seed(bg, cidtest::constant_seed()));
  CHECK((c0.rpsi.values.array() - 2.0).abs().maxCoeff() == 0.0);
  CHECK(c0.btaupsi.values.cwiseAbs().maxCoeff() < 1e-15);

  SeedConfig cfg;
  cfg.psi = {0.0, {0.4}, {}};
  const auto c1 = coefficients(bg, build_seed(bg, cfg));
  const Vector expected = bg.sample([](double t) { return 2.0 - 0.16 * std::sin(t) * std::sin(t); });
  CHECK((c1.rpsi.values - expected).cwiseAbs().maxCoeff() < 1e-13);
  CHECK(c1.rpsi.values.minCoeff() == doctest::Approx(2.0 - 0.16).epsilon(1e-12));

  SeedConfig neg;
  neg.potential = {{-1.0}};
  const auto c2 = coefficients(bg, build_seed(bg, neg));
  CHECK((c2.btaupsi.values.array() + 2.0).abs().maxCoeff() == 0.0);
  CHECK((c2.b_minus.values.array() + 2.0).abs().maxCoeff() == 0.0);
  CHECK(c2.b_plus.values.cwiseAbs().maxCoeff() == 0.0);
  CHECK(c2.sup_abs_b == 2.0);

  // Benchmark: B = -(2/3) tau^2 + 2 (0.1 + 0.05 psi^2).
  const SeedData b = build_seed(bg, cidtest::benchmark_seed());
  const auto cb = coefficients(bg, b);
  for (int j = 0; j < bg.size(); j += 17) {
    const double t = bg.nodes()[j], tau = 1 + 2 * std::cos(t), psi = 0.1 * std::cos(t);
    CHECK(cb.btaupsi[j] == doctest::Approx(-(2.0 / 3.0) * tau * tau + 0.2 + 0.1 * psi * psi).epsilon(1e-13));
  }
  CHECK((cb.b_minus.values + cb.b_plus.values - cb.btaupsi.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("scaling and source integral") {
  const auto bg = desk();
  const SeedData s = build_seed(bg, cidtest::benchmark_seed());
  const SeedData t = scale_data(s, 10.0);
  CHECK(t.sigma_amp == doctest::Approx(0.1));
  CHECK((t.pi.values - 10.0 * s.pi.values).cwiseAbs().maxCoeff() == 0.0);
  CHECK((t.tau.values - s.tau.values).cwiseAbs().maxCoeff() == 0.0);
  CHECK(seed_source_integral(bg, t) == doctest::Approx(100.0 * seed_source_integral(bg, s)).epsilon(1e-12));
  CHECK(sigma_norm_sq(1.0) == 6.0);
}

TEST_CASE("validation") {
  const auto bg = desk(128);
  SeedConfig ok;
  ok.tau = {1.0, {}, {}};
  ok.pi = {0.1, {}, {}};
  const auto r0 = validate(bg, build_seed(bg, ok));
  CHECK(r0.passed);
  CHECK(r0.coercive_by_positivity);

  SeedConfig big = ok;
  big.psi = {0.0, {2.0}, {}};
  const auto r1 = validate(bg, build_seed(bg, big));
  CHECK(r1.min_rpsi == doctest::Approx(-2.0).epsilon(1e-6));
  CHECK_FALSE(r1.coercive_by_positivity);
  // The eigensolve decides; the verdict must follow it.
  CHECK(r1.passed == (r1.lambda_min_h > 0.0));

  SeedData odd = build_seed(bg, ok);
  odd.tau.parity = Parity::odd;
  const auto r2 = validate(bg, odd);
  CHECK_FALSE(r2.passed);
  CHECK_FALSE(r2.parity_ok);
  REQUIRE_FALSE(r2.failures.empty());
  CHECK(r2.failures.front().find("parity") != std::string::npos);
}

TEST_CASE("potential polynomial") {
  const Potential v{{0.1, 0.0, 0.05}};
  CHECK(v(2.0) == doctest::Approx(0.3));
  CHECK(v.derivative(2.0) == doctest::Approx(0.2));
  CHECK(Potential{}(3.0) == 0.0);
}

TEST_CASE("coercivity estimate, constant R") {
  const auto bg = desk();
  const SeedData s = build_seed(bg, cidtest::constant_seed());
  const auto c = coefficients(bg, s);
  const auto est = estimate_coercivity(bg, c.rpsi, c.btaupsi);
  CHECK(est.lambda_min_h == doctest::Approx(2.0).epsilon(1e-10));
  const double constant_trial = 2.0 * std::pow(8 * kPi * kPi, 2.0 / 3.0);
  CHECK(est.s_est > 0.0);
  CHECK(est.s_est <= constant_trial * (1 + 1e-12));
  // Upper estimate of an infimum: never above the quotient of any trial function.
  std::mt19937_64 rng(5);
  const QuadraticForm form{kConformalCoeff, c.rpsi.values};
  for (int i = 0; i < 10; ++i)
    CHECK(est.s_est <= sobolev_quotient(bg, form, cidtest::random_positive(bg, rng, 1.0, 0.8)) * (1 + 1e-12));
  CHECK(est.s_prime_est <= est.s_est * (1 + 1e-12));  // k-norm has the smaller gradient weight
}

TEST_CASE("coercivity estimate, nonconstant R") {
  const auto bg = desk();
  const SeedData s = build_seed(bg, cidtest::benchmark_seed());
  const auto c = coefficients(bg, s);
  const auto est = estimate_coercivity(bg, c.rpsi, c.btaupsi);
  CHECK(est.lambda_min_h > 0.0);
  CHECK(est.lambda_min_h <= c.rpsi.values.maxCoeff());
  CHECK(est.lambda_min_h >= c.rpsi.values.minCoeff() - 1e-12);
  CHECK(est.R0 == doctest::Approx(ball_radius(est.s_est, c.sup_abs_b)).epsilon(1e-15));

  // Fixed rng seed: deterministic.
  const auto again = estimate_coercivity(bg, c.rpsi, c.btaupsi);
  CHECK(again.s_est == est.s_est);

  SeedConfig bad;
  bad.psi = {0.0, {3.0}, {}};
  const auto cb = coefficients(bg, build_seed(bg, bad));
  if (lowest_eigenvalue(weighted_operator(bg, kConformalCoeff, cb.rpsi.values)) <= 0.0)
    CHECK_THROWS_AS(estimate_coercivity(bg, cb.rpsi, cb.btaupsi), RegimeError);
}

TEST_CASE("ball radius") {
  CHECK(ball_radius(36.0, 1.0) == doctest::Approx(6.0 * std::pow(3.6, 0.25)).epsilon(1e-14));
  CHECK(ball_radius(36.0, 1.0) == doctest::Approx(8.26).epsilon(1e-3));
  CHECK(std::isinf(ball_radius(36.0, 0.0)));
}
