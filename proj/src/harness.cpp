#include "cid/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include <toml.hpp>

#include "cid/certificates.hpp"
#include "cid/reconstruction.hpp"

namespace cid {
namespace {

using nlohmann::ordered_json;
constexpr double kN = kCritical;

// ---------------------------------------------------------------------------
// config reading

class Section {
 public:
  Section(const toml::table* table, std::string path) : table_(table), path_(std::move(path)) {}

  std::string key_path(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  [[noreturn]] void fail(std::string_view key, const std::string& what) const {
    throw ConfigError("config key '" + key_path(key) + "': " + what);
  }

  const toml::node* get(std::string_view key) {
    used_.insert(std::string(key));
    return table_ ? table_->get(key) : nullptr;
  }

  double number(std::string_view key, double fallback) {
    const toml::node* n = get(key);
    if (!n) return fallback;
    if (auto v = n->value_exact<double>()) return check_finite(key, *v);
    if (auto v = n->value_exact<std::int64_t>()) return static_cast<double>(*v);
    fail(key, "expected a number");
  }

  long long integer(std::string_view key, long long fallback) {
    const toml::node* n = get(key);
    if (!n) return fallback;
    if (auto v = n->value_exact<std::int64_t>()) return *v;
    fail(key, "expected an integer");
  }

  bool boolean(std::string_view key, bool fallback) {
    const toml::node* n = get(key);
    if (!n) return fallback;
    if (auto v = n->value_exact<bool>()) return *v;
    fail(key, "expected a boolean");
  }

  std::string string(std::string_view key, const std::string& fallback) {
    const toml::node* n = get(key);
    if (!n) return fallback;
    if (auto v = n->value_exact<std::string>()) return *v;
    fail(key, "expected a string");
  }

  std::vector<double> numbers(std::string_view key) {
    const toml::node* n = get(key);
    std::vector<double> out;
    if (!n) return out;
    const toml::array* arr = n->as_array();
    if (!arr) fail(key, "expected an array of numbers");
    for (const auto& el : *arr) {
      if (auto v = el.value_exact<double>()) {
        out.push_back(check_finite(key, *v));
      } else if (auto w = el.value_exact<std::int64_t>()) {
        out.push_back(static_cast<double>(*w));
      } else {
        fail(key, "expected an array of numbers");
      }
    }
    return out;
  }

  Section sub(std::string_view key) {
    const toml::node* n = get(key);
    if (!n) return Section(nullptr, key_path(key));
    const toml::table* t = n->as_table();
    if (!t) fail(key, "expected a table");
    return Section(t, key_path(key));
  }

  /// Rejects any key that was never asked for.
  void finish() const {
    if (!table_) return;
    for (const auto& [k, v] : *table_) {
      if (!used_.count(std::string(k.str()))) throw ConfigError("unknown config key '" + key_path(k.str()) + "'");
    }
  }

 private:
  double check_finite(std::string_view key, double v) const {
    if (!std::isfinite(v)) fail(key, "must be finite");
    return v;
  }

  const toml::table* table_;
  std::string path_;
  std::set<std::string> used_;
};

FourierSpec read_fourier(Section s) {
  FourierSpec f;
  f.mean = s.number("mean", 0.0);
  f.cos = s.numbers("cos");
  f.sin = s.numbers("sin");
  s.finish();
  return f;
}

Mode parse_mode(const std::string& name, Section& s) {
  static const std::pair<const char*, Mode> table[] = {
      {"lichnerowicz", Mode::lichnerowicz}, {"coupled", Mode::coupled}, {"continuation", Mode::continuation},
      {"certify", Mode::certify},           {"sweep", Mode::sweep},     {"residuals", Mode::residuals},
      {"compare", Mode::compare}};
  for (const auto& [n, m] : table)
    if (name == n) return m;
  s.fail("mode", "unknown mode '" + name + "'");
}

void require(bool ok, Section& s, std::string_view key, const std::string& what) {
  if (!ok) s.fail(key, what);
}

// ---------------------------------------------------------------------------
// report helpers

ordered_json field_stats(const Vector& v) {
  return {{"min", v.minCoeff()}, {"max", v.maxCoeff()}, {"mean", v.mean()}};
}

ordered_json json_or_null(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

Check make_check(std::string name, double value, double bound, bool passed, bool asserted = true) {
  return Check{std::move(name), value, bound, passed, asserted};
}

Check at_most(std::string name, double value, double bound, bool asserted = true) {
  return make_check(std::move(name), value, bound, value <= bound, asserted);
}

ordered_json check_json(const Check& c) {
  return {{"name", c.name},
          {"value", json_or_null(c.value)},
          {"bound", json_or_null(c.bound)},
          {"passed", c.passed},
          {"asserted", c.asserted}};
}

struct Context {
  ReducedBackground bg;
  SeedData seed;
  LichCoefficients coeffs;
  CoercivityEstimate estimate;
};

Context make_context(const RunConfig& cfg, const SeedConfig& seed_cfg) {
  check_grid(cfg.grid);
  Context c{build_background(cfg.grid), {}, {}, {}};
  c.seed = build_seed(c.bg, seed_cfg);
  c.coeffs = coefficients(c.bg, c.seed);
  c.estimate = estimate_coercivity(c.bg, c.coeffs.rpsi, c.coeffs.btaupsi, cfg.quotient());
  return c;
}

Report base_report(const RunConfig& cfg, Mode mode) {
  Report r;
  r.strict = cfg.strict;
  r.json["tool"] = "cid";
  r.json["version"] = kVersion;
  r.json["modules"] = {{"reduced_geometry", kVersion},    {"seed_model", kVersion},
                       {"lichnerowicz_solver", kVersion}, {"momentum_solver", kVersion},
                       {"coupled_solver", kVersion},      {"lambda_continuation", kVersion},
                       {"certificates", kVersion},        {"reconstruction_diagnostics", kVersion},
                       {"cli_harness", kVersion}};
  r.json["config_hash"] = config_hash(cfg);
  r.json["mode"] = to_string(mode);
  r.json["config"] = canonical_config(cfg);
  return r;
}

ordered_json estimate_json(const CoercivityEstimate& e) {
  return {{"lambda_min_h", e.lambda_min_h},
          {"s_est", e.s_est},
          {"s_prime_est", e.s_prime_est},
          {"R0", json_or_null(e.R0)},
          {"s_trial_start", e.s_trial_start}};
}

ordered_json lich_json(const LichSolution& s) {
  const bool constant = s.phi.values.maxCoeff() - s.phi.values.minCoeff() < 1e-10;
  return {{"phi", field_stats(s.phi.values)},
          {"phi_const", constant ? ordered_json(s.phi.values.mean()) : ordered_json(nullptr)},
          {"residual", s.residual},
          {"energy_h", s.energy_h},
          {"iterations", s.iterations},
          {"eps_schedule", s.eps_schedule},
          {"eps_increments", s.eps_increments},
          {"hessian_min_eig", s.hessian_min_eig},
          {"stable", s.stable},
          {"ball_radius", json_or_null(s.ball_radius)},
          {"functional_value", s.functional_value},
          {"energy_bound_constant", s.energy_bound_constant},
          {"subsolution",
           {{"alpha", s.subsolution.alpha},
            {"theta", s.subsolution.theta},
            {"theta_inline", s.subsolution.theta_inline},
            {"safety", s.subsolution.safety},
            {"max_residual", s.subsolution.max_residual}}}};
}

// Bracketing, lower bound and the h-norm ball; shared by every mode that ends in a Lichnerowicz solve.
void add_lich_checks(Report& r, const Context& c, const LichSolution& sol, const LichOptions& opt) {
  const LowerBoundCert lb = lower_bound_cert(c.bg, c.coeffs, sol.subsolution, seed_source_integral(c.bg, c.seed));
  r.json["lower_bound"] = {{"green_min", lb.green_min}, {"theta", lb.theta}, {"eta", lb.eta}};
  r.checks.push_back(at_most("lichnerowicz residual", sol.residual, opt.residual_tol));
  r.checks.push_back(make_check("hessian positive", sol.hessian_min_eig, 0.0, sol.stable));
  if (opt.enforce_ball && std::isfinite(c.estimate.R0))
    r.checks.push_back(at_most("h-norm within B_R0", std::sqrt(sol.energy_h), c.estimate.R0));
  for (const Audit& a : audit_bracketing(sol, lb.eta)) r.checks.push_back(make_check(a.name, a.value, a.bound, a.passed));
}

ordered_json stable_set_json(const StableSetParams& p, const VectorConstants& k) {
  return {{"gamma", k.gamma}, {"c1", k.c1},       {"c2", k.c2},         {"x", p.x},
          {"lam", p.lam},     {"R", p.R},         {"f_of_R", p.f_of_R}, {"absorbs_b", p.absorbs_b},
          {"feasible", p.feasible}};
}

void add_physical(Report& r, const Context& c, const Field& phi, const Field& f, double tol) {
  const ResidualReport rr = residual_report(c.bg, c.seed, phi, f);
  const double pmin = phi.values.minCoeff();
  const double kappa_h = std::pow(pmin, -(kN - 1.0));
  const double kappa_m = std::pow(pmin, -kN);
  r.json["residuals"] = {{"hamiltonian_sup", rr.hamiltonian_sup},
                         {"momentum_sup", rr.momentum_sup},
                         {"conformal_lich_sup", rr.conformal_lich_sup},
                         {"conformal_vec_sup", rr.conformal_vec_sup},
                         {"obstruction", rr.obstruction},
                         {"kappa_hamiltonian", kappa_h},
                         {"kappa_momentum", kappa_m}};
  r.checks.push_back(at_most("conformal lichnerowicz residual", rr.conformal_lich_sup, tol));
  r.checks.push_back(at_most("conformal vector residual", rr.conformal_vec_sup, tol));
  r.checks.push_back(at_most("hamiltonian constraint residual", rr.hamiltonian_sup, kappa_h * tol));
  r.checks.push_back(at_most("momentum constraint residual", rr.momentum_sup, kappa_m * tol));
}

struct CoupledOutcome {
  Context ctx;
  CoupledRun run;
};

CoupledOutcome coupled_pipeline(const RunConfig& cfg, Report& r) {
  CoupledOutcome out{make_context(cfg, cfg.seed), {}};
  r.json["coercivity"] = estimate_json(out.ctx.estimate);
  const VectorConstants k = constants_c1_c2(out.ctx.bg, out.ctx.seed, estimate_gamma(out.ctx.bg, cfg.quotient()).value);
  r.json["stable_set"] = stable_set_json(stable_set_params(out.ctx.bg, out.ctx.seed, out.ctx.estimate, k), k);
  out.run = solve_coupled(out.ctx.bg, out.ctx.seed, out.ctx.estimate, k, std::nullopt, cfg.coupled_options());
  const CoupledRun& run = out.run;
  const CoupledState& s = run.state;
  r.json["coupled"] = {{"iterations", s.iter},          {"converged", run.converged},
                       {"residual_lich", s.residual_lich}, {"residual_vec", s.residual_vec},
                       {"obstruction", s.obstruction},  {"y", s.y},
                       {"a_integral", s.a_integral},    {"a_bound", s.a_bound},
                       {"f", field_stats(s.f.values)},  {"stable_set_preserved", run.stable_set_preserved}};
  r.json["lichnerowicz"] = lich_json(s.lich);

  CsvTable trace{"coupled_trace.csv",
                 {"iter", "delta", "y", "y_bound", "in_C", "residual_lich", "residual_vec", "obstruction"},
                 {}};
  for (const auto& t : run.trace)
    trace.rows.push_back({double(t.iter), t.delta, t.y, t.y_bound, t.in_C ? 1.0 : 0.0, t.residual_lich, t.residual_vec,
                          t.obstruction});
  r.tables.push_back(std::move(trace));

  const CoupledOptions opt = cfg.coupled_options();
  r.checks.push_back(make_check("coupled converged", double(s.iter), double(opt.max_iter), run.converged));
  r.checks.push_back(at_most("coupled lichnerowicz residual", s.residual_lich, opt.residual_tol));
  r.checks.push_back(at_most("coupled vector residual", s.residual_vec, opt.residual_tol));
  r.checks.push_back(at_most("momentum obstruction", s.obstruction, kObstructionTol));
  r.checks.push_back(make_check("stable set feasible", run.params.f_of_R, run.params.R, run.params.feasible, false));
  r.checks.push_back(make_check("iterates in stable set", s.y, run.params.R, run.stable_set_preserved,
                                run.params.feasible));
  r.checks.push_back(at_most("int A_W <= a priori bound", s.a_integral, s.a_bound, false));
  add_lich_checks(r, out.ctx, s.lich, cfg.lich);
  return out;
}

void run_lichnerowicz(const RunConfig& cfg, Report& r) {
  const Context c = make_context(cfg, cfg.seed);
  r.json["coercivity"] = estimate_json(c.estimate);
  const Field zero(c.bg.constant(0.0), Parity::odd);
  const LichSolution sol = solve_lichnerowicz(c.bg, c.coeffs, momentum_density(c.bg, c.seed, zero), c.estimate, cfg.lich);
  r.json["lichnerowicz"] = lich_json(sol);
  add_lich_checks(r, c, sol, cfg.lich);
}

void run_continuation(const RunConfig& cfg, Report& r) {
  const Context c = make_context(cfg, cfg.seed);
  r.json["coercivity"] = estimate_json(c.estimate);
  const Family fam = continue_family(c.bg, c.seed, c.estimate, cfg.continuation, cfg.lich);
  CsvTable t{"continuation.csv",
             {"lambda", "newton_iters", "jacobian_min_sv", "residual", "obstruction", "energy_h"},
             {}};
  for (const auto& s : fam.states)
    t.rows.push_back({s.lambda, double(s.newton_iters), s.jacobian_min_sv, s.residual, s.obstruction, s.energy_h});
  r.tables.push_back(std::move(t));
  double min_sv = std::numeric_limits<double>::infinity();
  for (const auto& s : fam.states) min_sv = std::min(min_sv, s.jacobian_min_sv);
  r.json["continuation"] = {{"lambda_reached", fam.lambda_reached},
                            {"stalled", fam.stalled},
                            {"message", fam.message},
                            {"states", fam.states.size()},
                            {"min_jacobian_sv", min_sv}};
  r.checks.push_back(make_check("continuation reached lambda_max", fam.lambda_reached, cfg.continuation.lambda_max,
                                !fam.stalled && fam.lambda_reached >= cfg.continuation.lambda_max));
  const LambdaState& last = fam.states.back();
  if (last.lambda > 0.0) {
    const RescaledSolution rs = rescale(c.bg, last, c.seed, std::numeric_limits<double>::infinity());
    r.json["rescaled"] = {{"lambda", rs.lambda},
                          {"epsilon", rs.epsilon},
                          {"sigma_amp", rs.sigma_amp_scaled},
                          {"phi", field_stats(rs.phi.values)},
                          {"residual_lich", rs.residual_lich},
                          {"residual_vec", rs.residual_vec}};
    r.checks.push_back(at_most("rescaled residual", std::max(rs.residual_lich, rs.residual_vec), 1e-8));
  }
}

void run_certify(const RunConfig& cfg, Report& r) {
  const CoupledOutcome out = coupled_pipeline(cfg, r);
  const Context& c = out.ctx;
  const CoupledState& s = out.run.state;
  const CertificateChain ch = moser_chain(c.bg, c.coeffs, momentum_density(c.bg, c.seed, s.f),
                                          c.estimate.s_prime_est, out.run.params.R, cfg.certify_depth, cfg.quotient());
  r.json["chain"] = {{"q", ch.q},           {"k", ch.k},           {"x", ch.x_list}, {"s", ch.s_list},
                     {"C", ch.C_list},      {"R_levels", ch.R_list}, {"R", ch.R}};
  for (const Audit& a : audit_chain(c.bg, ch, s.phi)) r.checks.push_back(make_check(a.name, a.value, a.bound, a.passed));
}

void run_residuals(const RunConfig& cfg, Report& r) {
  const CoupledOutcome out = coupled_pipeline(cfg, r);
  const Context& c = out.ctx;
  const CoupledState& s = out.run.state;
  add_physical(r, c, s.phi, s.f, cfg.coupled.residual_tol);
  const auto conf = conformal_residuals(c.bg, c.seed, s.phi, s.f);
  const auto phys = physical_residuals(c.bg, reconstruct(c.bg, c.seed, s.phi, s.f), c.seed.potential);
  CsvTable t{"residuals.csv", {"theta", "phi", "f", "lich", "vec", "hamiltonian", "momentum"}, {}};
  for (int j = 0; j < c.bg.size(); ++j)
    t.rows.push_back({c.bg.nodes()[j], s.phi.values[j], s.f.values[j], conf.lich[j], conf.vec[j], phys.hamiltonian[j],
                      phys.momentum[j]});
  r.tables.push_back(std::move(t));
}

struct SweepRow {
  double value = 0.0;
  double a_integral = std::numeric_limits<double>::quiet_NaN();
  double energy_h = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  bool feasible = false;
  int iterations = 0;
  std::string error;
};

void run_sweep(const RunConfig& cfg, Report& r) {
  if (cfg.sweep.values.empty()) throw ConfigError("config key 'sweep.values': empty sweep");
  // R_psi does not depend on the swept data, so coercivity and gamma are shared.
  const Context c = make_context(cfg, cfg.seed);
  r.json["coercivity"] = estimate_json(c.estimate);
  const double gamma = estimate_gamma(c.bg, cfg.quotient()).value;
  const CoupledOptions opt = cfg.coupled_options();

  std::vector<SweepRow> rows(cfg.sweep.values.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < rows.size(); i = next++) {
      SweepRow& row = rows[i];
      row.value = cfg.sweep.values[i];
      try {
        const SeedData seed = build_seed(c.bg, sweep_point(cfg.seed, cfg.sweep.parameter, row.value));
        const VectorConstants k = constants_c1_c2(c.bg, seed, gamma);
        row.feasible = stable_set_params(c.bg, seed, c.estimate, k).feasible;
        const CoupledRun run = solve_coupled(c.bg, seed, c.estimate, k, std::nullopt, opt);
        row.converged = run.converged;
        row.iterations = run.state.iter;
        row.a_integral = run.state.a_integral;
        row.energy_h = run.state.lich.energy_h;
      } catch (const Error& e) {
        row.error = e.what();
      }
    }
  };
  const int nthreads = std::max(1, std::min<int>(cfg.threads, int(rows.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  CsvTable t{"sweep.csv", {"amp", "a_integral", "energy_h", "converged", "R_feasible", "iterations"}, {}};
  ordered_json points = ordered_json::array();
  std::vector<double> xs, ys;
  std::ptrdiff_t first_infeasible = -1, first_failure = -1;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const SweepRow& row = rows[i];
    t.rows.push_back({row.value, row.a_integral, row.energy_h, row.converged ? 1.0 : 0.0, row.feasible ? 1.0 : 0.0,
                      double(row.iterations)});
    points.push_back({{"value", row.value},
                      {"a_integral", json_or_null(row.a_integral)},
                      {"energy_h", json_or_null(row.energy_h)},
                      {"converged", row.converged},
                      {"R_feasible", row.feasible},
                      {"iterations", row.iterations},
                      {"error", row.error.empty() ? ordered_json(nullptr) : ordered_json(row.error)}});
    if (row.converged) {
      xs.push_back(row.a_integral);
      ys.push_back(row.energy_h);
    }
    if (!row.feasible && first_infeasible < 0) first_infeasible = std::ptrdiff_t(i);
    if (!row.converged && first_failure < 0) first_failure = std::ptrdiff_t(i);
  }
  r.tables.push_back(std::move(t));

  const double target = 2.0 / (kN + 2.0);
  const double slope = xs.size() >= 2 ? loglog_slope(xs, ys) : std::numeric_limits<double>::quiet_NaN();
  r.json["sweep"] = {{"parameter", cfg.sweep.parameter},
                     {"points", points},
                     {"slope", json_or_null(slope)},
                     {"slope_target", target},
                     {"first_infeasible", first_infeasible},
                     {"first_failure", first_failure}};
  r.checks.push_back(make_check("energy slope", slope, target, std::abs(slope - target) <= 0.05));
  r.checks.push_back(make_check("feasibility boundary precedes solver failure", double(first_infeasible),
                                double(first_failure),
                                first_failure < 0 || (first_infeasible >= 0 && first_infeasible <= first_failure)));
  r.checks.push_back(make_check("all sweep points converged", double(xs.size()), double(rows.size()),
                                xs.size() == rows.size(), false));
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::config: return "config";
    case ErrorKind::regime: return "regime";
    case ErrorKind::numerical: return "numerical";
  }
  return "unknown";
}

void write_error(const std::string& dir, const std::optional<RunConfig>& cfg, const std::string& kind,
                 const std::string& message) {
  ordered_json j;
  j["tool"] = "cid";
  j["version"] = kVersion;
  j["config_hash"] = cfg ? ordered_json(config_hash(*cfg)) : ordered_json(nullptr);
  j["mode"] = cfg ? ordered_json(to_string(cfg->mode)) : ordered_json(nullptr);
  j["error"] = {{"kind", kind}, {"message", message}};
  j["passed"] = false;
  std::filesystem::create_directories(dir);
  std::ofstream(std::filesystem::path(dir) / "report.json") << j.dump(2) << '\n';
}

}  // namespace

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::lichnerowicz: return "lichnerowicz";
    case Mode::coupled: return "coupled";
    case Mode::continuation: return "continuation";
    case Mode::certify: return "certify";
    case Mode::sweep: return "sweep";
    case Mode::residuals: return "residuals";
    case Mode::compare: return "compare";
  }
  return "unknown";
}

QuotientOptions RunConfig::quotient() const {
  QuotientOptions q;
  q.rng_seed = rng_seed;
  return q;
}

CoupledOptions RunConfig::coupled_options() const {
  CoupledOptions c = coupled;
  c.lich = lich;
  return c;
}

RunConfig parse_config(std::string_view text) {
  toml::table doc;
  try {
    doc = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config parse error at line " << e.source().begin.line << ": " << e.description();
    throw ConfigError(msg.str());
  }
  RunConfig cfg;
  Section root(&doc, "");

  cfg.mode = parse_mode(root.string("mode", "coupled"), root);
  cfg.strict = root.boolean("strict", false);
  const long long rng = root.integer("rng_seed", static_cast<long long>(cfg.rng_seed));
  require(rng >= 0, root, "rng_seed", "must be nonnegative");
  cfg.rng_seed = static_cast<std::uint64_t>(rng);
  const long long threads = root.integer("threads", 1);
  require(threads >= 1 && threads <= 256, root, "threads", "must be between 1 and 256");
  cfg.threads = int(threads);

  {
    Section s = root.sub("grid");
    const long long m = s.integer("M", cfg.grid.num_points);
    require(m >= 16 && m % 2 == 0 && m <= 8192, s, "M", "must be even and between 16 and 8192");
    cfg.grid.num_points = int(m);
    cfg.grid.circle_length = s.number("L", cfg.grid.circle_length);
    require(cfg.grid.circle_length > 0.0, s, "L", "must be positive");
    s.finish();
  }
  {
    Section s = root.sub("seed");
    cfg.seed.tau = read_fourier(s.sub("tau"));
    cfg.seed.psi = read_fourier(s.sub("psi"));
    cfg.seed.pi = read_fourier(s.sub("pi"));
    cfg.seed.sigma_amp = s.number("sigma_amp", 0.0);
    Section pot = s.sub("potential");
    cfg.seed.potential.coeffs = pot.numbers("coeffs");
    pot.finish();
    s.finish();
  }
  {
    Section s = root.sub("lichnerowicz");
    LichOptions& l = cfg.lich;
    l.residual_tol = s.number("residual_tol", l.residual_tol);
    require(l.residual_tol > 0.0, s, "residual_tol", "must be positive");
    l.step_tol = s.number("step_tol", l.step_tol);
    require(l.step_tol > 0.0, s, "step_tol", "must be positive");
    const long long levels = s.integer("eps_levels", l.eps_levels);
    require(levels >= 0 && levels <= 60, s, "eps_levels", "must be between 0 and 60");
    l.eps_levels = int(levels);
    const long long newton = s.integer("max_newton", l.max_newton);
    require(newton >= 1 && newton <= 10000, s, "max_newton", "must be between 1 and 10000");
    l.max_newton = int(newton);
    l.subsolution_safety = s.number("subsolution_safety", l.subsolution_safety);
    require(l.subsolution_safety > 0.0 && l.subsolution_safety <= 1.0, s, "subsolution_safety", "must be in (0, 1]");
    l.enforce_ball = s.boolean("enforce_ball", l.enforce_ball);
    s.finish();
  }
  {
    Section s = root.sub("coupled");
    CoupledOptions& c = cfg.coupled;
    c.tol = s.number("tol", c.tol);
    require(c.tol > 0.0, s, "tol", "must be positive");
    const long long it = s.integer("max_iter", c.max_iter);
    require(it >= 1 && it <= 100000, s, "max_iter", "must be between 1 and 100000");
    c.max_iter = int(it);
    c.residual_tol = s.number("residual_tol", c.residual_tol);
    require(c.residual_tol > 0.0, s, "residual_tol", "must be positive");
    s.finish();
  }
  {
    Section s = root.sub("momentum");
    cfg.coupled.strict_momentum = s.boolean("strict", cfg.coupled.strict_momentum);
    s.finish();
  }
  {
    Section s = root.sub("continuation");
    ContinuationOptions& c = cfg.continuation;
    c.lambda_max = s.number("lambda_max", c.lambda_max);
    require(c.lambda_max > 0.0 && c.lambda_max <= 1.0, s, "lambda_max", "must be in (0, 1]");
    const long long steps = s.integer("num_steps", c.num_steps);
    require(steps >= 1 && steps <= 100000, s, "num_steps", "must be between 1 and 100000");
    c.num_steps = int(steps);
    c.min_step = s.number("min_step", c.min_step);
    require(c.min_step > 0.0, s, "min_step", "must be positive");
    c.corrector.tol = s.number("corrector_tol", c.corrector.tol);
    require(c.corrector.tol > 0.0, s, "corrector_tol", "must be positive");
    const long long it = s.integer("corrector_max_iter", c.corrector.max_iter);
    require(it >= 1 && it <= 1000, s, "corrector_max_iter", "must be between 1 and 1000");
    c.corrector.max_iter = int(it);
    s.finish();
  }
  {
    Section s = root.sub("certify");
    const long long depth = s.integer("depth", cfg.certify_depth);
    require(depth >= 1 && depth <= 4, s, "depth", "must be between 1 and 4");
    cfg.certify_depth = int(depth);
    s.finish();
  }
  {
    Section s = root.sub("sweep");
    cfg.sweep.parameter = s.string("parameter", cfg.sweep.parameter);
    require(cfg.sweep.parameter == "sigma_amp" || cfg.sweep.parameter == "data_scale", s, "parameter",
            "must be 'sigma_amp' or 'data_scale'");
    cfg.sweep.values = s.numbers("values");
    for (std::size_t i = 0; i < cfg.sweep.values.size(); ++i) {
      require(cfg.sweep.values[i] > 0.0, s, "values", "must be positive");
      require(i == 0 || cfg.sweep.values[i] > cfg.sweep.values[i - 1], s, "values", "must be strictly increasing");
    }
    s.finish();
  }
  {
    Section s = root.sub("output");
    cfg.output_dir = s.string("dir", cfg.output_dir);
    require(!cfg.output_dir.empty(), s, "dir", "must not be empty");
    s.finish();
  }
  root.finish();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

nlohmann::ordered_json canonical_config(const RunConfig& c) {
  auto fourier = [](const FourierSpec& f) { return ordered_json{{"mean", f.mean}, {"cos", f.cos}, {"sin", f.sin}}; };
  return {{"mode", to_string(c.mode)},
          {"strict", c.strict},
          {"rng_seed", c.rng_seed},
          {"threads", c.threads},
          {"grid", {{"M", c.grid.num_points}, {"L", c.grid.circle_length}}},
          {"seed",
           {{"tau", fourier(c.seed.tau)},
            {"psi", fourier(c.seed.psi)},
            {"pi", fourier(c.seed.pi)},
            {"sigma_amp", c.seed.sigma_amp},
            {"potential", {{"coeffs", c.seed.potential.coeffs}}}}},
          {"lichnerowicz",
           {{"residual_tol", c.lich.residual_tol},
            {"step_tol", c.lich.step_tol},
            {"eps_levels", c.lich.eps_levels},
            {"max_newton", c.lich.max_newton},
            {"subsolution_safety", c.lich.subsolution_safety},
            {"enforce_ball", c.lich.enforce_ball}}},
          {"coupled",
           {{"tol", c.coupled.tol}, {"max_iter", c.coupled.max_iter}, {"residual_tol", c.coupled.residual_tol}}},
          {"momentum", {{"strict", c.coupled.strict_momentum}}},
          {"continuation",
           {{"lambda_max", c.continuation.lambda_max},
            {"num_steps", c.continuation.num_steps},
            {"min_step", c.continuation.min_step},
            {"corrector_tol", c.continuation.corrector.tol},
            {"corrector_max_iter", c.continuation.corrector.max_iter}}},
          {"certify", {{"depth", c.certify_depth}}},
          {"sweep", {{"parameter", c.sweep.parameter}, {"values", c.sweep.values}}}};
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::string config_hash(const RunConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_config(config).dump())));
  return buf;
}

SeedConfig sweep_point(const SeedConfig& base, const std::string& parameter, double value) {
  SeedConfig s = base;
  if (parameter == "sigma_amp") {
    s.sigma_amp = value;
  } else if (parameter == "data_scale") {
    s.sigma_amp *= value;
    s.pi.mean *= value;
    for (double& c : s.pi.cos) c *= value;
    for (double& c : s.pi.sin) c *= value;
  } else {
    throw ConfigError("config key 'sweep.parameter': unknown parameter '" + parameter + "'");
  }
  return s;
}

bool Report::passed() const {
  return std::all_of(checks.begin(), checks.end(), [&](const Check& c) { return c.passed || !(c.asserted || strict); });
}

std::string Report::dump() const {
  ordered_json j = json;
  ordered_json checks_json = ordered_json::array();
  for (const Check& c : checks) checks_json.push_back(check_json(c));
  j["checks"] = checks_json;
  j["passed"] = passed();
  return j.dump(2) + "\n";
}

Report run(const RunConfig& cfg) {
  if (cfg.mode == Mode::compare) return compare_methods(cfg);
  Report r = base_report(cfg, cfg.mode);
  switch (cfg.mode) {
    case Mode::lichnerowicz: run_lichnerowicz(cfg, r); break;
    case Mode::coupled: coupled_pipeline(cfg, r); break;
    case Mode::continuation: run_continuation(cfg, r); break;
    case Mode::certify: run_certify(cfg, r); break;
    case Mode::sweep: run_sweep(cfg, r); break;
    case Mode::residuals: run_residuals(cfg, r); break;
    case Mode::compare: break;
  }
  return r;
}

Report compare_methods(const RunConfig& cfg) {
  Report r = base_report(cfg, Mode::compare);
  const Context c = make_context(cfg, cfg.seed);
  r.json["coercivity"] = estimate_json(c.estimate);

  std::optional<CoupledRun> coupled;
  std::string coupled_error, cont_error;
  try {
    coupled = solve_coupled(c.bg, c.seed, c.estimate, std::nullopt, cfg.coupled_options());
  } catch (const Error& e) {
    coupled_error = e.what();
  }
  std::optional<RescaledSolution> cont;
  double lambda_reached = 0.0;
  try {
    ContinuationOptions opt = cfg.continuation;
    opt.lambda_max = 1.0;
    const Family fam = continue_family(c.bg, c.seed, c.estimate, opt, cfg.lich);
    lambda_reached = fam.lambda_reached;
    if (fam.stalled) throw NumericalError(fam.message);
    cont = rescale(c.bg, fam.states.back(), c.seed, std::numeric_limits<double>::infinity());
  } catch (const Error& e) {
    cont_error = e.what();
  }

  auto status = [](bool ok, const std::string& err) {
    return ordered_json{{"ok", ok}, {"error", ok ? ordered_json(nullptr) : ordered_json(err)}};
  };
  r.json["coupled"] = status(coupled.has_value(), coupled_error);
  r.json["continuation"] = status(cont.has_value(), cont_error);
  r.json["continuation"]["lambda_reached"] = lambda_reached;
  const bool consistent = coupled.has_value() == cont.has_value();
  r.json["consistent_failure"] = !coupled && !cont;
  r.checks.push_back(make_check("coupled pipeline succeeded", 0.0, 0.0, coupled.has_value()));
  r.checks.push_back(make_check("continuation pipeline succeeded", lambda_reached, 1.0, cont.has_value()));
  r.checks.push_back(make_check("pipelines agree on solvability", 0.0, 0.0, consistent));
  if (coupled && cont) {
    const double dphi = (coupled->state.phi.values - cont->phi.values).cwiseAbs().maxCoeff();
    const double df = (coupled->state.f.values - cont->f.values).cwiseAbs().maxCoeff();
    r.json["disagreement"] = {{"phi", dphi}, {"f", df}, {"flagged", std::max(dphi, df) > 1e-5}};
    r.checks.push_back(at_most("method disagreement", std::max(dphi, df), 1e-5));
  }
  return r;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw PreconditionError("need at least two points");
  const auto n = static_cast<Eigen::Index>(x.size());
  Matrix a(n, 2);
  Vector b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw PreconditionError("log-log fit needs positive data");
    a(i, 0) = std::log(x[i]);
    a(i, 1) = 1.0;
    b[i] = std::log(y[i]);
  }
  return a.colPivHouseholderQr().solve(b)[0];
}

void write_report(const Report& report, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream(fs::path(dir) / "report.json", std::ios::binary) << report.dump();
  for (const CsvTable& t : report.tables) {
    std::ofstream out(fs::path(dir) / t.file, std::ios::binary);
    for (std::size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << t.header[i];
    out << '\n';
    for (const auto& row : t.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_double(row[i]);
      out << '\n';
    }
  }
}

int execute(const std::string& config_path, std::optional<Mode> mode_override, bool strict_flag,
            const std::optional<std::string>& out_dir, std::ostream& log) {
  std::optional<RunConfig> cfg;
  std::string dir = out_dir.value_or("out");
  try {
    cfg = load_config(config_path);
    if (mode_override) cfg->mode = *mode_override;
    if (strict_flag) cfg->strict = true;
    if (!out_dir) dir = cfg->output_dir;
    const Report report = run(*cfg);
    write_report(report, dir);
    for (const Check& c : report.checks) {
      log << (c.passed ? "PASS" : (c.asserted || report.strict ? "FAIL" : "WARN")) << "  " << c.name << "  "
          << format_double(c.value) << " (bound " << format_double(c.bound) << ")\n";
    }
    const bool ok = report.passed();
    log << (ok ? "all asserted checks passed" : "asserted checks failed") << "; report in " << dir << "\n";
    return ok ? 0 : 1;
  } catch (const Error& e) {
    const bool input = e.kind() == ErrorKind::config || e.kind() == ErrorKind::precondition;
    log << "error (" << kind_name(e.kind()) << "): " << e.what() << "\n";
    try {
      write_error(dir, cfg, kind_name(e.kind()), e.what());
    } catch (const std::exception&) {
    }
    return input ? 2 : 1;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    try {
      write_error(dir, cfg, "internal", e.what());
    } catch (const std::exception&) {
    }
    return 1;
  }
}

}  // namespace cid
