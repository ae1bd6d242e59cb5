#ifndef CID_HARNESS_HPP
#define CID_HARNESS_HPP

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cid/continuation.hpp"
#include "cid/coupled.hpp"

namespace cid {

inline constexpr const char* kVersion = "1.0.0";

enum class Mode { lichnerowicz, coupled, continuation, certify, sweep, residuals, compare };

std::string to_string(Mode mode);

struct SweepSpec {
  std::string parameter = "sigma_amp";  // sigma_amp | data_scale
  std::vector<double> values;
};

/// Everything a run depends on. Defaults are the solver defaults.
struct RunConfig {
  GridSpec grid;
  SeedConfig seed;
  LichOptions lich;
  CoupledOptions coupled;  // coupled.lich is overwritten by `lich`
  ContinuationOptions continuation;
  int certify_depth = 3;
  SweepSpec sweep;
  std::string output_dir = "out";
  Mode mode = Mode::coupled;
  bool strict = false;
  std::uint64_t rng_seed = QuotientOptions{}.rng_seed;
  int threads = 1;

  QuotientOptions quotient() const;
  CoupledOptions coupled_options() const;
};

/// Parses a TOML document. Unknown keys, wrong types and out-of-range values
/// throw ConfigError naming the key.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

/// Canonical JSON form of the config (output directory excluded) and its FNV-1a hash.
nlohmann::ordered_json canonical_config(const RunConfig& config);
std::uint64_t fnv1a64(std::string_view bytes);
std::string config_hash(const RunConfig& config);

SeedConfig sweep_point(const SeedConfig& base, const std::string& parameter, double value);

/// One asserted (or, outside strict mode, advisory) invariant.
struct Check {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool passed = false;
  bool asserted = true;
};

struct CsvTable {
  std::string file;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

struct Report {
  nlohmann::ordered_json json;
  std::vector<Check> checks;
  std::vector<CsvTable> tables;
  bool strict = false;

  bool passed() const;
  /// Report JSON with the checks folded in; no timestamps, so identical inputs
  /// give identical bytes.
  std::string dump() const;
};

/// Runs the configured mode. Solver failures propagate as cid::Error.
Report run(const RunConfig& config);

/// Continuation to lambda = 1 and the coupled fixed point on the same seed;
/// reports the sup-norm disagreement of phi and f (flagged above 1e-5).
/// Failures of either pipeline are recorded rather than thrown.
Report compare_methods(const RunConfig& config);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

void write_report(const Report& report, const std::string& dir);

/// Full command: load, run, write report and traces. Exit code 0 if every
/// asserted check passed, 1 on solver-regime or numerical failure (or a failed
/// check), 2 on a configuration error. Failures still write a report.
int execute(const std::string& config_path, std::optional<Mode> mode_override, bool strict_flag,
            const std::optional<std::string>& out_dir, std::ostream& log);

}  // namespace cid

#endif  // CID_HARNESS_HPP
