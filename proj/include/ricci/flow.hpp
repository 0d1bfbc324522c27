#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ricci/curvature.hpp"
#include "ricci/manifold.hpp"
#include "ricci/sobolev.hpp"
#include "ricci/state.hpp"

namespace ricci {

enum class Termination { HorizonReached, MonitorBreach, CurvatureBlowup, StepUnderflow };

std::string to_string(Termination termination);

/// Monitor names, as reported in MonitorBreach.
inline constexpr const char* kMonitorMetric = "(3.8)";
inline constexpr const char* kMonitorSobolev = "(3.9)";
inline constexpr const char* kMonitorEnergy = "(3.10)";

struct FlowConfig {
  MetricField initial;
  double ricci_bound = 0.0;       // K, hypothesis |Ric(g0)| <= K
  double ball_radius = 0.25;      // r
  double energy_threshold = 1.0;  // bound for the initial ball energies
  double time_horizon = 0.0;      // T_request
  double dt_safety = 0.25;
  std::optional<bool> deturck;    // unset: on for the grid family only
  bool stop_on_monitor_breach = true;
  std::optional<double> fixed_dt;
  int cadence = 0;                // 0: max(1, floor(estimated steps / 500))
  bool dense_centers = false;
  bool track_diameter = true;
  bool track_energy = true;
  bool track_sobolev = true;
  /// Every k-th recorded sample keeps its full state; 0 keeps the endpoints only.
  int snapshot_stride = 0;
  SobolevOptions sobolev;

  bool deturck_enabled() const;
  /// Throws InvalidArgument naming the offending field.
  void validate() const;
};

struct SeriesSample {
  double t = 0.0;
  double sup_rm = 0.0;
  double sup_ric = 0.0;
  double dev = 0.0;
  double lambda_min = 1.0;
  double lambda_max = 1.0;
  double diam = 0.0;
  double e0 = 0.0;
  double sobolev = 0.0;
};

struct FlowTrace {
  ManifoldModel model;
  double ball_radius = 0.0;
  std::vector<FlowState> states;  // snapshots, time ordered
  std::vector<SeriesSample> series;
  Termination termination = Termination::HorizonReached;
  std::string breach;             // monitor name on MonitorBreach
  std::string failure;            // message on CurvatureBlowup / StepUnderflow
  std::size_t steps = 0;
  int cadence = 1;
  double final_time = 0.0;

  // Initial data used by the checks.
  double initial_energy = 0.0;    // sup over centers of the radius-r ball energy in g0
  bool smallness_ok = true;       // initial_energy <= energy_threshold
  double initial_ric_term = 0.0;  // sup over centers of (int_{B_r} |Ric|^{(n+2)/2})^{2/(n+2)}
  double sobolev_initial = 0.0;   // A0 on the reference ball
  double e0_initial = 0.0;

  int dim() const { return model.dim; }
};

/// Time derivative of the metric storage: -2 Ric (+ L_W g with the gauge on).
std::vector<double> flow_velocity(const MetricField& g, const MetricField& background,
                                  bool deturck);

/// DeTurck vector W^k = g^{pq}(Gamma^k_pq - Gamma0^k_pq), node-major.
std::vector<double> deturck_field(const MetricField& g, const MetricField& background);

/// One classical RK4 step. Throws CurvatureBlowup when the new metric has
/// min eigenvalue <= 1e-10 or sup |Rm| > 1e8.
FlowState step(const FlowState& state, double dt, const FlowConfig& config);

double suggest_dt(const FlowState& state, const FlowConfig& config);

FlowTrace run_flow(const FlowConfig& config);

enum class OracleCase { EinsteinShrinker, FlatStationary };

/// (1 - 2 lambda t) g0 for the shrinker, g0 for the flat case.
MetricField exact_solution_oracle(OracleCase which, const MetricField& g0, double t,
                                  double lambda = 0.0);

/// Pointwise defects of the scalar inequalities for |Rm| and |Ric| between
/// two consecutive states: d_t|Rm| - Lap|Rm| - c|Rm|^2 and
/// d_t|Ric| - Lap|Ric| - c|Rm||Ric|, with time-centered spatial terms.
struct EvolutionResidual {
  std::vector<double> rm_residual;
  std::vector<double> ric_residual;
  double calibrated_rm = 0.0;   // max of (d_t - Lap)|Rm| / |Rm|^2
  double calibrated_ric = 0.0;  // max of (d_t - Lap)|Ric| / (|Rm||Ric|)
};
EvolutionResidual evolution_residual(const FlowState& a, const FlowState& b, double c_n);

}  // namespace ricci
