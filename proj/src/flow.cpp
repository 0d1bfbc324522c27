#include "ricci/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>

#include "ricci/error.hpp"
#include "ricci/localization.hpp"
#include "ricci/small_matrix.hpp"
#include "ricci/spectral.hpp"

namespace ricci {

namespace {

constexpr double kBlowupCurvature = 1e8;
constexpr double kMinStep = 1e-14;
constexpr int kTargetSamples = 500;

// Christoffel symbols, inverse metric and Ricci tensor of one grid metric.
struct FieldView {
  std::span<const double> christoffel;
  std::span<const double> inverse_metric;
  std::span<const double> ricci;
};

template <int n>
void add_lie_derivative(const MetricField& g, const FieldView& field,
                        const std::vector<double>& gamma0, std::vector<double>& v) {
  const auto& model = g.model();
  const std::size_t nodes = model.node_count();
  // W^k = g^{pq} (Gamma^k_pq - Gamma0^k_pq)
  std::vector<double> W(nodes * n, 0.0);
  for (std::size_t p = 0; p < nodes; ++p) {
    const double* gi = field.inverse_metric.data() + p * n * n;
    const double* gam = field.christoffel.data() + p * n * n * n;
    const double* gam0 = gamma0.data() + p * n * n * n;
#pragma GCC unroll 8
    for (int k = 0; k < n; ++k) {
      double acc = 0.0;
#pragma GCC unroll 8
      for (int a = 0; a < n; ++a)
#pragma GCC unroll 8
        for (int b = 0; b < n; ++b) {
          const int idx = (k * n + a) * n + b;
          acc += gi[a * n + b] * (gam[idx] - gam0[idx]);
        }
      W[p * n + k] = acc;
    }
  }
  // (L_W g)_ij = W^k d_k g_ij + g_kj d_i W^k + g_ik d_j W^k
  const double inv_2h = 0.5 / model.spacing;
  const auto values = g.values();
  std::size_t stride[n];
  stride[0] = 1;
  for (int a = 1; a < n; ++a) stride[a] = stride[a - 1] * model.resolution;
  double dW[n * n];   // dW[i*n + k] = d_i W^k
  double dg[n * n * n];
  int c[n] = {};  // lattice coordinates of p, axis 0 fastest
  for (std::size_t p = 0; p < nodes; ++p) {
    if (p > 0)
      for (int a = 0; a < n && ++c[a] == model.resolution; ++a) c[a] = 0;
#pragma GCC unroll 8
    for (int i = 0; i < n; ++i) {
      const std::size_t up = c[i] + 1 == model.resolution ? p + stride[i] - stride[i] * model.resolution
                                                          : p + stride[i];
      const std::size_t dn = c[i] == 0 ? p - stride[i] + stride[i] * model.resolution : p - stride[i];
#pragma GCC unroll 8
      for (int k = 0; k < n; ++k) dW[i * n + k] = (W[up * n + k] - W[dn * n + k]) * inv_2h;
#pragma GCC unroll 64
      for (int a = 0; a < n * n; ++a)
        dg[i * n * n + a] = (values[up * n * n + a] - values[dn * n * n + a]) * inv_2h;
    }
    const double* gp = values.data() + p * n * n;
    const double* w = W.data() + p * n;
#pragma GCC unroll 8
    for (int i = 0; i < n; ++i)
#pragma GCC unroll 8
      for (int j = i; j < n; ++j) {
        double lie = 0.0;
#pragma GCC unroll 8
        for (int k = 0; k < n; ++k) {
          lie += w[k] * dg[k * n * n + i * n + j];
          lie += gp[k * n + j] * dW[i * n + k];
          lie += gp[i * n + k] * dW[j * n + k];
        }
        v[p * n * n + i * n + j] += lie;
        if (j != i) v[p * n * n + j * n + i] = v[p * n * n + i * n + j];
      }
  }
}

std::vector<double> grid_velocity(const MetricField& g, const FieldView& field,
                                  const std::vector<double>* background_gamma, bool deturck) {
  std::vector<double> v(field.ricci.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = -2.0 * field.ricci[k];
  if (!deturck) return v;
  with_dim(g.dim(), [&]<int N>() { add_lie_derivative<N>(g, field, *background_gamma, v); });
  return v;
}

// Ricci flow plus L_W g for the radial field W = w d/dx chosen so psi keeps
// its profile up to a uniform factor: (psi w)_x = psi (c + (n-1) k_r) with
// w = 0 at both poles. Without it the radial parametrization drifts and the
// pole regularity is lost within t ~ 0.1 on the round sphere.
std::vector<double> warped_velocity(const MetricField& g) {
  const int n = g.dim();
  const auto& model = g.model();
  const auto sec = warped_sectional(g);
  const auto psi = g.stretch();
  const auto phi = g.warp();
  const std::size_t nodes = psi.size();
  const auto line = SpectralLine::get(model.resolution, model.side_length);

  std::vector<double> source(nodes);
  for (std::size_t j = 0; j < nodes; ++j) source[j] = psi[j] * (n - 1) * sec.radial[j];
  const auto length = line->even_cumulative_integral(psi);
  auto flux = line->even_cumulative_integral(source);
  const double c = -flux.back() / length.back();
  for (std::size_t j = 0; j < nodes; ++j) flux[j] += c * length[j];
  const auto phi_x = line->odd_derivative(phi, 1);

  std::vector<double> v(2 * nodes);
  for (std::size_t j = 0; j < nodes; ++j) {
    const bool pole = j == 0 || j + 1 == nodes;
    const double w = pole ? 0.0 : flux[j] / psi[j];
    v[j] = c * psi[j];
    v[nodes + j] = -phi[j] * (sec.radial[j] + (n - 2) * sec.tangential[j]) + w * phi_x[j];
  }

  // Keep phi_x = psi at x = 0 and phi_x = -psi at x = L exactly: the discrete
  // flow does not preserve these and the violation grows like N^2.
  const auto dv = line->odd_derivative(std::span<const double>(v).subspan(nodes), 1);
  const double L = model.side_length;
  const double k = std::numbers::pi / L;
  const double need_left = v[0] - dv[0];
  const double need_right = -v[nodes - 1] - dv[nodes - 1];
  // alpha sin(kx) + beta sin(2kx): slopes k(alpha + 2 beta) and k(2 beta - alpha).
  const double alpha = (need_left - need_right) / (2.0 * k);
  const double beta = (need_left + need_right) / (4.0 * k);
  for (std::size_t j = 1; j + 1 < nodes; ++j) {
    const double x = model.radial_coordinate(j);
    v[nodes + j] += alpha * std::sin(k * x) + beta * std::sin(2.0 * k * x);
  }
  return v;
}

std::vector<double> su2_velocity(const MetricField& g) {
  const auto t = g.triple();
  const auto m = milnor_curvature(t[0], t[1], t[2]);
  return {-2.0 * t[0] * m.ricci[0], -2.0 * t[1] * m.ricci[1], -2.0 * t[2] * m.ricci[2]};
}

std::vector<double> velocity(const MetricField& g, const std::vector<double>* background_gamma,
                             bool deturck) {
  switch (g.model().family) {
    case Family::PeriodicGrid: {
      const auto f = compute_ricci(g);
      return grid_velocity(g, {f.christoffel, f.inverse_metric, f.ricci}, background_gamma, deturck);
    }
    case Family::WarpedSphere: return warped_velocity(g);
    case Family::HomogeneousSU2: return su2_velocity(g);
  }
  throw Unsupported("flow: unknown family");
}

MetricField advance(const MetricField& g, const std::vector<double>& k, double h) {
  std::vector<double> v(g.values().begin(), g.values().end());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += h * k[i];
  return MetricField(g.model(), std::move(v));
}

FlowState rk4(const FlowState& state, double dt, const std::vector<double>* background_gamma,
              bool deturck) {
  if (!(dt > 0.0)) throw InvalidArgument("step: dt must be positive");
  const MetricField& g = state.metric;
  std::vector<double> v(g.values().begin(), g.values().end());
  try {
    // The cached curvature of a grid state already holds what the first stage needs.
    const auto& cached = state.curvature;
    const bool reuse = g.model().family == Family::PeriodicGrid &&
                       cached.christoffel.size() == g.values().size() * g.dim();
    const auto k1 = reuse ? grid_velocity(g, FieldView{cached.christoffel, cached.inverse_metric, cached.ricci},
                                          background_gamma, deturck)
                          : velocity(g, background_gamma, deturck);
    const auto k2 = velocity(advance(g, k1, 0.5 * dt), background_gamma, deturck);
    const auto k3 = velocity(advance(g, k2, 0.5 * dt), background_gamma, deturck);
    const auto k4 = velocity(advance(g, k3, dt), background_gamma, deturck);
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
  } catch (const DegenerateMetric& e) {
    // an intermediate stage left the cone of metrics
    throw CurvatureBlowup(e.what());
  }
  MetricField next(g.model(), std::move(v));

  FlowState out;
  out.t = state.t + dt;
  // compute_curvature rejects a min eigenvalue below kDegenerateEigenvalue
  try {
    out.curvature = compute_curvature(next, Assembly::Reduced);
  } catch (const DegenerateMetric& e) {
    throw CurvatureBlowup(e.what());
  }
  const double peak = tensor_sup_norms(out.curvature).rm;
  if (!(peak <= kBlowupCurvature)) {
    throw CurvatureBlowup("sup |Rm| exceeded 1e8 (" + std::to_string(peak) + ")");
  }
  out.metric = std::move(next);
  return out;
}

std::vector<double> background_christoffel(const FlowConfig& config) {
  if (config.initial.model().family != Family::PeriodicGrid || !config.deturck_enabled()) return {};
  return compute_ricci(config.initial).christoffel;
}

// Energy balls of radius r in g0 used for the initial smallness data.
struct InitialData {
  double energy = 0.0;
  double ric_term = 0.0;
};

InitialData initial_ball_data(const FlowState& s0, double r, bool dense) {
  const auto& g0 = s0.metric;
  const auto& model = g0.model();
  std::vector<std::size_t> centers;
  if (model.family == Family::WarpedSphere) {
    centers = {0, model.node_count() - 1};
  } else if (dense) {
    for (std::size_t p = 0; p < model.node_count(); ++p) centers.push_back(p);
  } else {
    const int n = model.dim;
    int total = 1;
    for (int a = 0; a < n; ++a) total *= 3;
    for (int code = 0; code < total; ++code) {
      std::array<int, kMaxDim> c{};
      int rem = code;
      for (int a = 0; a < n; ++a) {
        c[a] = (rem % 3) * model.resolution / 3;
        rem /= 3;
      }
      centers.push_back(model.index(std::span<const int>(c.data(), n)));
    }
    const auto& rm = s0.curvature.norm_rm;
    centers.push_back(static_cast<std::size_t>(std::max_element(rm.begin(), rm.end()) - rm.begin()));
  }
  const int n = model.dim;
  InitialData out;
  for (std::size_t c : centers) {
    const Ball b = ball(geodesic_distance(g0, c, r), r, g0);
    out.energy = std::max(out.energy, local_energy(s0.curvature, b, g0));
    out.ric_term =
        std::max(out.ric_term, ball_lp_norm(s0.curvature.norm_ric, 0.5 * (n + 2), b, g0));
  }
  return out;
}

}  // namespace

std::string to_string(Termination termination) {
  switch (termination) {
    case Termination::HorizonReached: return "HorizonReached";
    case Termination::MonitorBreach: return "MonitorBreach";
    case Termination::CurvatureBlowup: return "CurvatureBlowup";
    case Termination::StepUnderflow: return "StepUnderflow";
  }
  return "unknown";
}

FlowState make_state(MetricField g, double t) {
  FlowState s;
  s.t = t;
  s.curvature = compute_curvature(g);
  s.metric = std::move(g);
  return s;
}

bool FlowConfig::deturck_enabled() const {
  if (deturck.has_value()) return *deturck && initial.model().family == Family::PeriodicGrid;
  return initial.model().family == Family::PeriodicGrid;
}

void FlowConfig::validate() const {
  if (initial.values().empty()) throw InvalidArgument("flow.initial: missing initial metric");
  if (!(ricci_bound >= 0.0)) throw InvalidArgument("flow.ricci_bound must be >= 0");
  if (!(ball_radius > 0.0)) throw InvalidArgument("flow.ball_radius must be positive");
  if (ball_radius > 1.0) throw InvalidArgument("flow.ball_radius must be <= 1");
  if (!(energy_threshold > 0.0)) throw InvalidArgument("flow.energy_threshold must be positive");
  if (!(time_horizon > 0.0)) throw InvalidArgument("flow.time_horizon must be positive");
  if (!(dt_safety > 0.0 && dt_safety <= 1.0)) {
    throw InvalidArgument("flow.dt_safety must lie in (0, 1]");
  }
  if (fixed_dt.has_value() && !(*fixed_dt > 0.0)) {
    throw InvalidArgument("flow.fixed_dt must be positive");
  }
  if (cadence < 0) throw InvalidArgument("cadence must be >= 0");
  if (snapshot_stride < 0) throw InvalidArgument("flow.snapshot_stride must be >= 0");
}

std::vector<double> deturck_field(const MetricField& g, const MetricField& background) {
  if (g.model().family != Family::PeriodicGrid) throw Unsupported("deturck_field: grid only");
  const int n = g.dim();
  const auto field = compute_ricci(g);
  const auto field0 = compute_ricci(background);
  const std::size_t nodes = g.model().node_count();
  std::vector<double> W(nodes * n, 0.0);
  for (std::size_t p = 0; p < nodes; ++p)
    for (int k = 0; k < n; ++k) {
      double acc = 0.0;
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          const std::size_t idx = ((p * n + k) * n + a) * n + b;
          acc += field.inverse_metric[(p * n + a) * n + b] *
                 (field.christoffel[idx] - field0.christoffel[idx]);
        }
      W[p * n + k] = acc;
    }
  return W;
}

std::vector<double> flow_velocity(const MetricField& g, const MetricField& background,
                                  bool deturck) {
  const bool gauge = deturck && g.model().family == Family::PeriodicGrid;
  std::vector<double> gamma0;
  if (gauge) gamma0 = compute_ricci(background).christoffel;
  return velocity(g, gauge ? &gamma0 : nullptr, gauge);
}

FlowState step(const FlowState& state, double dt, const FlowConfig& config) {
  const auto gamma0 = background_christoffel(config);
  return rk4(state, dt, gamma0.empty() ? nullptr : &gamma0, config.deturck_enabled());
}

double suggest_dt(const FlowState& state, const FlowConfig& config) {
  const auto& model = state.metric.model();
  const double peak = tensor_sup_norms(state.curvature).rm;
  if (model.family == Family::HomogeneousSU2) return config.dt_safety * 0.01 / (peak + 1e-12);
  const double h = model.spacing;
  const double parabolic = h * h * min_metric_eigenvalue(state.metric) / (4.0 * model.dim);
  return config.dt_safety * std::min(parabolic, 0.1 / (peak + 1e-12));
}

FlowTrace run_flow(const FlowConfig& config) {
  config.validate();
  const auto& g0 = config.initial;
  const auto& model = g0.model();
  const bool graph = model.family != Family::HomogeneousSU2;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  FlowTrace trace;
  trace.model = model;
  trace.ball_radius = config.ball_radius;
  FlowState state = make_state(g0, 0.0);

  std::optional<EnergyTracker> tracker;
  std::optional<Ball> sobolev_ball;
  std::vector<double> sobolev_warm;
  if (graph) {
    const auto init = initial_ball_data(state, config.ball_radius, config.dense_centers);
    trace.initial_energy = init.energy;
    trace.initial_ric_term = init.ric_term;
    trace.smallness_ok = init.energy <= config.energy_threshold;
    if (config.track_energy) tracker.emplace(g0, config.ball_radius, config.dense_centers);
    if (config.track_sobolev) {
      sobolev_ball = ball(geodesic_distance(g0, 0, config.ball_radius), config.ball_radius, g0);
    }
  }
  const auto gamma0 = background_christoffel(config);
  const std::vector<double>* gamma0_ptr = gamma0.empty() ? nullptr : &gamma0;
  const bool gauge = config.deturck_enabled();

  auto measure = [&](const FlowState& s) {
    SeriesSample x;
    x.t = s.t;
    const auto sup = tensor_sup_norms(s.curvature);
    x.sup_rm = sup.rm;
    x.sup_ric = sup.ric;
    const auto cmp = metric_comparison(s.metric, g0);
    x.dev = cmp.dev;
    x.lambda_min = cmp.lambda_min;
    x.lambda_max = cmp.lambda_max;
    x.diam = (graph && config.track_diameter) ? diameter(s.metric) : nan;
    x.e0 = tracker ? tracker->update(s.t, s.curvature, s.metric) : nan;
    if (sobolev_ball) {
      const auto est = estimate_sobolev(*sobolev_ball, s.metric, config.sobolev, sobolev_warm);
      sobolev_warm = est.optimizer;
      x.sobolev = est.estimate;
    } else {
      x.sobolev = nan;
    }
    return x;
  };

  auto breached = [&](const SeriesSample& x) -> std::string {
    if (x.lambda_min < 0.5 || x.lambda_max > 2.0) return kMonitorMetric;
    if (sobolev_ball && x.sobolev > 4.0 * trace.sobolev_initial) return kMonitorSobolev;
    if (tracker && x.e0 > 2.0 * trace.e0_initial) return kMonitorEnergy;
    return {};
  };

  const auto first = measure(state);
  trace.series.push_back(first);
  trace.sobolev_initial = first.sobolev;
  trace.e0_initial = first.e0;
  trace.states.push_back(state);

  const double horizon = config.time_horizon;
  const double dt0 = config.fixed_dt ? *config.fixed_dt : suggest_dt(state, config);
  if (config.cadence > 0) {
    trace.cadence = config.cadence;
  } else {
    const double estimated = std::ceil(horizon / dt0);
    trace.cadence = std::max(1, static_cast<int>(std::floor(estimated / kTargetSamples)));
  }

  std::size_t recorded = 0;
  bool last_snapshotted = true;
  const double finish_tol = 1e-12 * std::max(1.0, horizon);
  while (horizon - state.t > finish_tol) {
    double dt = config.fixed_dt ? *config.fixed_dt : suggest_dt(state, config);
    if (!(dt >= kMinStep)) {
      trace.termination = Termination::StepUnderflow;
      trace.failure = "suggested dt " + std::to_string(dt) + " below 1e-14";
      break;
    }
    dt = std::min(dt, horizon - state.t);
    try {
      state = rk4(state, dt, gamma0_ptr, gauge);
    } catch (const CurvatureBlowup& e) {
      trace.termination = Termination::CurvatureBlowup;
      trace.failure = e.what();
      break;
    }
    ++trace.steps;
    last_snapshotted = false;
    const bool at_end = horizon - state.t <= finish_tol;
    if (trace.steps % trace.cadence != 0 && !at_end) continue;

    const auto x = measure(state);
    trace.series.push_back(x);
    ++recorded;
    if (config.snapshot_stride > 0 && recorded % config.snapshot_stride == 0) {
      trace.states.push_back(state);
      last_snapshotted = true;
    }
    const auto name = breached(x);
    if (!name.empty() && config.stop_on_monitor_breach) {
      trace.termination = Termination::MonitorBreach;
      trace.breach = name;
      break;
    }
  }
  if (!last_snapshotted) trace.states.push_back(state);
  trace.final_time = state.t;
  return trace;
}

MetricField exact_solution_oracle(OracleCase which, const MetricField& g0, double t,
                                  double lambda) {
  if (t < 0.0) throw InvalidArgument("oracle: t must be >= 0");
  if (which == OracleCase::FlatStationary) return g0;
  const double factor = 1.0 - 2.0 * lambda * t;
  if (!(factor > 0.0)) throw InvalidArgument("oracle: t is beyond the collapse time 1/(2 lambda)");
  return g0.scaled(factor);
}

EvolutionResidual evolution_residual(const FlowState& a, const FlowState& b, double c_n) {
  const double dt = b.t - a.t;
  if (dt == 0.0) throw InvalidArgument("evolution_residual: dt = 0");
  if (!(a.metric.model() == b.metric.model())) {
    throw InvalidArgument("evolution_residual: model mismatch");
  }
  const auto& ca = a.curvature;
  const auto& cb = b.curvature;
  const auto lap_rm_a = laplacian(ca, a.metric, ca.norm_rm);
  const auto lap_rm_b = laplacian(cb, b.metric, cb.norm_rm);
  const auto lap_ric_a = laplacian(ca, a.metric, ca.norm_ric);
  const auto lap_ric_b = laplacian(cb, b.metric, cb.norm_ric);
  const std::size_t nodes = ca.nodes();
  EvolutionResidual out;
  out.rm_residual.resize(nodes);
  out.ric_residual.resize(nodes);
  out.calibrated_rm = -std::numeric_limits<double>::infinity();
  out.calibrated_ric = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < nodes; ++p) {
    const double rm = 0.5 * (ca.norm_rm[p] + cb.norm_rm[p]);
    const double ric = 0.5 * (ca.norm_ric[p] + cb.norm_ric[p]);
    const double rm_sq = 0.5 * (ca.norm_rm[p] * ca.norm_rm[p] + cb.norm_rm[p] * cb.norm_rm[p]);
    const double rm_ric = 0.5 * (ca.norm_rm[p] * ca.norm_ric[p] + cb.norm_rm[p] * cb.norm_ric[p]);
    const double drm = (cb.norm_rm[p] - ca.norm_rm[p]) / dt - 0.5 * (lap_rm_a[p] + lap_rm_b[p]);
    const double dric =
        (cb.norm_ric[p] - ca.norm_ric[p]) / dt - 0.5 * (lap_ric_a[p] + lap_ric_b[p]);
    out.rm_residual[p] = drm - c_n * rm_sq;
    out.ric_residual[p] = dric - c_n * rm_ric;
    if (rm > 1e-12) out.calibrated_rm = std::max(out.calibrated_rm, drm / rm_sq);
    if (rm > 1e-12 && ric > 1e-12) out.calibrated_ric = std::max(out.calibrated_ric, dric / rm_ric);
  }
  if (!std::isfinite(out.calibrated_rm)) out.calibrated_rm = 0.0;
  if (!std::isfinite(out.calibrated_ric)) out.calibrated_ric = 0.0;
  return out;
}

}  // namespace ricci
