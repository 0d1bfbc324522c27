#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ricci/error.hpp"
#include "ricci/flow.hpp"
#include "ricci/verifier.hpp"

namespace ricci {

/// Malformed or inconsistent scenario configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct ManifoldSpec {
  std::string family = "torus";     // torus | sphere | su2
  int dim = 3;
  int resolution = 16;
  double side_length = 1.0;         // torus
  double epsilon_p = 0.0;           // torus conformal amplitude
  std::vector<int> wave;            // torus wave vector
  std::string profile = "round";    // sphere: round | perturbed
  double rho = 1.0;                 // sphere
  double profile_epsilon = 0.0;     // sphere, perturbed profile
  std::array<double, 3> abc{1.0, 1.0, 1.0};  // su2
};

struct ScenarioConfig {
  std::string name = "scenario";
  ManifoldSpec manifold;

  double ricci_bound = 0.0;
  double ball_radius = 0.25;
  double energy_threshold = 1.0;
  double time_horizon = 0.0;
  double dt_safety = 0.25;
  std::optional<bool> deturck;
  bool stop_on_monitor_breach = true;
  std::optional<double> fixed_dt;
  int cadence = 0;
  bool dense_centers = false;
  bool track_diameter = true;
  bool track_energy = true;
  bool track_sobolev = true;
  int snapshot_stride = 0;
  int sobolev_starts = 20;

  VerifyOptions verification;
  std::string output_dir = ".";
  std::uint64_t seed = kDefaultSeed;
};

/// Parses a JSON document against the strict schema; unknown keys, wrong
/// types and out-of-range values raise ConfigError naming the field.
ScenarioConfig parse_config(std::string_view text);
ScenarioConfig load_config(const std::string& path);
std::string config_to_json(const ScenarioConfig& config);

/// Throws ConfigError naming the field; also runs the flow config checks.
void validate_config(const ScenarioConfig& config);

MetricField build_initial_metric(const ManifoldSpec& spec);
FlowConfig to_flow_config(const ScenarioConfig& config);
/// Verification toggles adjusted to what the family records.
VerifyOptions effective_verification(const ScenarioConfig& config);

/// Sets one sweep parameter: epsilon_p, resolution, dt_safety or r.
void apply_parameter(ScenarioConfig& config, const std::string& parameter, double value);

inline constexpr const char* kCsvHeader = "t,sup_rm,sup_ric,dev,lambda_min,lambda_max,diam,e0,sobolev";

/// 17 significant digits per value.
std::string trace_csv(const FlowTrace& trace);
std::vector<SeriesSample> parse_trace_csv(std::string_view text);

/// Trace rebuilt from a CSV for re-verification; initial quantities come
/// from the first row.
FlowTrace trace_from_series(const ScenarioConfig& config, std::vector<SeriesSample> series);

std::string report_json(const EstimateReport& report, const FlowTrace& trace);

struct ScenarioResult {
  FlowTrace trace;
  EstimateReport report;
  int exit_code = 0;
};

/// 0 all checks pass, 1 a check failed, 3 numerical failure.
int exit_code_for(const FlowTrace& trace, const EstimateReport& report);

ScenarioResult run_scenario(const ScenarioConfig& config);

struct OracleOutcome {
  std::string name;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string detail;
};

/// einstein | flat | berger | heat-eigenmode | moser-schedule.
OracleOutcome run_oracle(const std::string& name);
std::vector<std::string> oracle_names();

}  // namespace ricci
