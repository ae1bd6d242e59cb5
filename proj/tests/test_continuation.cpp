#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "common.hpp"
#include "cid/continuation.hpp"
#include "cid/coupled.hpp"

using namespace cid;
using cidtest::desk;

namespace {

struct Setup {
  ReducedBackground bg;
  SeedData seed;
  CoercivityEstimate estimate;
};

Setup setup(const SeedConfig& cfg) {
  auto bg = desk();
  SeedData seed = build_seed(bg, cfg);
  const auto c = coefficients(bg, seed);
  auto est = estimate_coercivity(bg, c.rpsi, c.btaupsi);
  return {std::move(bg), std::move(seed), std::move(est)};
}

const Setup& benchmark() {
  static const Setup s = setup(cidtest::benchmark_seed());
  return s;
}

const Family& benchmark_family() {
  static const Family f = [] {
    const Setup& s = benchmark();
    return continue_family(s.bg, s.seed, s.estimate);
  }();
  return f;
}

const LambdaState& state_at(const Family& fam, double lambda) {
  for (const auto& st : fam.states)
    if (std::abs(st.lambda - lambda) < 1e-14) return st;
  throw std::runtime_error("lambda not on the family");
}

}  // namespace

TEST_CASE("lambda = 0 solves") {
  {
    const Setup s = setup(cidtest::constant_seed());
    const auto st = solve_lambda0(s.bg, s.seed, s.estimate);
    CHECK((st.phi_t.values.array() - 1.0).abs().maxCoeff() < 1e-10);
    CHECK(st.f_t.values.cwiseAbs().maxCoeff() == 0.0);
  }
  {
    SeedConfig cfg = cidtest::benchmark_seed();
    cfg.pi = {0.0, {}, {}};
    const Setup s = setup(cfg);
    const auto st = solve_lambda0(s.bg, s.seed, s.estimate);
    CHECK(st.f_t.values.cwiseAbs().maxCoeff() == 0.0);
    // Oracle: the B = 0 Lichnerowicz solve with a_w = |sigma|^2.
    const auto c = coefficients(s.bg, s.seed);
    const auto lich = solve_lichnerowicz(s.bg, make_coefficients(c.rpsi.values, s.bg.constant(0.0)),
                                         make_density(s.bg, s.bg.constant(sigma_norm_sq(s.seed.sigma_amp))), s.estimate);
    CHECK((st.phi_t.values - lich.phi.values).cwiseAbs().maxCoeff() < 1e-10);
  }
  {
    SeedConfig cfg = cidtest::benchmark_seed();
    cfg.psi = {0.3, {}, {}};
    cfg.pi = {0.5, {0.2}, {}};
    const Setup s = setup(cfg);
    CHECK(solve_lambda0(s.bg, s.seed, s.estimate).f_t.values.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("bordered Jacobian against central differences on 10 random states") {
  const Setup& s = benchmark();
  std::mt19937_64 rng(555);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int m = s.bg.size();
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const double lambda = u(rng);
    Vector x(2 * m + 1);
    x.head(m) = cidtest::random_positive(s.bg, rng, 0.8, 0.3, 6);
    Vector f = cidtest::random_positive(s.bg, rng, 0.0, 0.05, 6);
    f.array() -= f.mean();
    x.segment(m, m) = f;
    x[2 * m] = 0.01 * (u(rng) - 0.5);
    Vector dir(2 * m + 1);
    dir.head(m) = cidtest::random_positive(s.bg, rng, 0.0, 1.0, 8);
    dir.segment(m, m) = cidtest::random_positive(s.bg, rng, 0.0, 0.1, 8);
    dir[2 * m] = u(rng) - 0.5;
    const double h = 1e-6;
    const Vector fd = (family_residual(s.bg, s.seed, lambda, x + h * dir) -
                       family_residual(s.bg, s.seed, lambda, x - h * dir)) /
                      (2 * h);
    const Vector an = family_jacobian(s.bg, s.seed, lambda, x) * dir;
    worst = std::max(worst, (fd - an).norm() / an.norm());
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("corrector: fixed point and quadratic convergence") {
  const Setup& s = benchmark();
  const auto l0 = solve_lambda0(s.bg, s.seed, s.estimate);
  const auto same = newton_corrector(s.bg, s.seed, 0.0, l0);
  CHECK(same.newton_iters == 0);

  LambdaState guess = l0;
  guess.phi_t.values.array() *= 1.0 + 0.05 * s.bg.sample([](double t) { return std::cos(2 * t); }).array();
  const auto corrected = newton_corrector(s.bg, s.seed, 0.0, guess);
  const auto& h = corrected.residual_history;
  REQUIRE(h.size() >= 3);
  int quadratic_steps = 0;
  for (std::size_t k = 0; k + 1 < h.size(); ++k) {
    if (h[k + 1] < 1e-10) continue;  // rounding floor
    CHECK(h[k + 1] <= h[k] * h[k]);
    ++quadratic_steps;
  }
  CHECK(quadratic_steps >= 2);
  CHECK((corrected.phi_t.values - l0.phi_t.values).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("B = 0 family is constant in lambda") {
  const Setup s = setup(cidtest::cmc_seed(0.0, 0.05, 0.2, 0.0));
  REQUIRE(coefficients(s.bg, s.seed).sup_abs_b == 0.0);
  ContinuationOptions opt;
  opt.num_steps = 4;
  const auto fam = continue_family(s.bg, s.seed, s.estimate, opt);
  CHECK_FALSE(fam.stalled);
  for (const auto& st : fam.states) {
    CHECK((st.phi_t.values - fam.states.front().phi_t.values).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(st.f_t.values.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("benchmark family reaches 1 and matches the coupled solve") {
  const Setup& s = benchmark();
  const Family& fam = benchmark_family();
  CHECK_FALSE(fam.stalled);
  CHECK(fam.lambda_reached == 1.0);
  CHECK(fam.states.size() - 1 <= 64);
  for (const auto& st : fam.states) CHECK(st.residual < 1e-8);
  CHECK(fam.states.front().residual < 1e-8);

  const auto run = solve_coupled(s.bg, s.seed, s.estimate);
  const auto& last = fam.states.back();
  CHECK((last.phi_t.values - run.state.phi.values).cwiseAbs().maxCoeff() < 1e-7);
  CHECK((last.f_t.values - run.state.f.values).cwiseAbs().maxCoeff() < 1e-7);
  CHECK(last.obstruction < 1e-10);
}

TEST_CASE("rescaling") {
  const Setup& s = benchmark();
  const Family& fam = benchmark_family();
  const auto one = rescale(s.bg, state_at(fam, 1.0), s.seed);
  CHECK((one.phi.values - state_at(fam, 1.0).phi_t.values).cwiseAbs().maxCoeff() == 0.0);
  CHECK(one.epsilon == 1.0);
  CHECK(one.sigma_amp_scaled == s.seed.sigma_amp);

  const auto& q = state_at(fam, 0.25);
  const auto r = rescale(s.bg, q, s.seed);
  CHECK((r.phi.values - 0.5 * q.phi_t.values).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((r.f.values - q.f_t.values / 16.0).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(r.sigma_amp_scaled == doctest::Approx(s.seed.sigma_amp / 16.0).epsilon(1e-15));
  CHECK((r.pi_scaled.values - s.seed.pi.values / 16.0).cwiseAbs().maxCoeff() < 1e-17);
  CHECK(r.epsilon == 1.0 / 16.0);
  CHECK(r.residual_lich < 1e-8);
  CHECK(r.residual_vec < 1e-8);

  const auto zero = rescale(s.bg, fam.states.front(), s.seed);
  CHECK(zero.degenerate);
  CHECK(zero.phi.values.cwiseAbs().maxCoeff() == 0.0);

  // Independent check of the rescaled pair with the library residuals.
  const SeedData scaled = rescaled_seed(s.seed, 0.25);
  const auto c = coefficients(s.bg, scaled);
  const auto d = momentum_density(s.bg, scaled, r.f);
  CHECK(lichnerowicz_residual(s.bg, c, d, r.phi.values).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(vector_residual(s.bg, scaled, r.phi, r.f).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("C1 surrogate: difference quotients stable under step halving") {
  const Setup& s = benchmark();
  const Family& fam = benchmark_family();
  const auto& base = state_at(fam, 0.5);
  auto quotient = [&](double h) {
    const auto next = newton_corrector(s.bg, s.seed, 0.5 + h, base);
    return (next.phi_t.values - base.phi_t.values).cwiseAbs().maxCoeff() / h;
  };
  const double q1 = quotient(0.04), q2 = quotient(0.02), q3 = quotient(0.01);
  CHECK(q1 > 0.0);
  CHECK(std::abs(q2 - q3) < std::abs(q1 - q2) + 1e-12);
  CHECK(std::abs(q2 - q3) / q3 < 0.05);
}

TEST_CASE("fold: continuation stalls at the analytic turning point") {
  const Setup s = setup(cidtest::fold_seed());
  // Constant branch 2x^8 - b x^12 = 2 with b = 1.5 lambda^2 folds at b = 4/(3 sqrt 3).
  const double lambda_star = std::sqrt(4.0 / (3.0 * std::sqrt(3.0)) / 1.5);
  const auto fam = continue_family(s.bg, s.seed, s.estimate);
  CHECK(fam.stalled);
  CHECK(fam.message.find("continuation stalled at lambda") != std::string::npos);
  CHECK(fam.lambda_reached < lambda_star);
  CHECK(fam.lambda_reached > lambda_star - 1e-3);
  const auto& st = fam.states;
  REQUIRE(st.size() >= 4);
  for (std::size_t i = st.size() - 3; i < st.size(); ++i) CHECK(st[i].jacobian_min_sv < st[i - 1].jacobian_min_sv);
  CHECK(st.back().jacobian_min_sv < 0.5 * st.front().jacobian_min_sv);
}
