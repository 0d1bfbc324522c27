#include "ricci/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ricci/moser.hpp"

namespace ricci {

namespace {

using nlohmann::json;

// Reads one JSON object, rejecting keys outside the declared set.
class ObjectReader {
 public:
  ObjectReader(const json& object, std::string path, std::set<std::string> allowed)
      : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) throw ConfigError(path_ + ": expected an object");
    for (const auto& [key, _] : object_.items()) {
      if (!allowed.count(key)) throw ConfigError(field(key) + ": unknown key");
    }
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }
  bool has(const std::string& key) const { return object_.contains(key); }
  const json& at(const std::string& key) const { return object_.at(key); }

  void read(const std::string& key, double& out) const {
    if (!has(key)) return;
    const auto& v = at(key);
    if (!v.is_number()) throw ConfigError(field(key) + ": expected a number");
    out = v.get<double>();
  }
  void read(const std::string& key, int& out) const {
    if (!has(key)) return;
    const auto& v = at(key);
    if (!v.is_number_integer()) throw ConfigError(field(key) + ": expected an integer");
    out = v.get<int>();
  }
  void read(const std::string& key, bool& out) const {
    if (!has(key)) return;
    const auto& v = at(key);
    if (!v.is_boolean()) throw ConfigError(field(key) + ": expected true or false");
    out = v.get<bool>();
  }
  void read(const std::string& key, std::string& out) const {
    if (!has(key)) return;
    const auto& v = at(key);
    if (!v.is_string()) throw ConfigError(field(key) + ": expected a string");
    out = v.get<std::string>();
  }
  void read(const std::string& key, std::optional<bool>& out) const {
    if (!has(key) || at(key).is_null()) return;
    bool b = false;
    read(key, b);
    out = b;
  }
  void read(const std::string& key, std::optional<double>& out) const {
    if (!has(key) || at(key).is_null()) return;
    double d = 0.0;
    read(key, d);
    out = d;
  }

 private:
  const json& object_;
  std::string path_;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::string format17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double relative_storage_error(const MetricField& got, const MetricField& want) {
  const auto a = got.values();
  const auto b = want.values();
  double worst = 0.0;
  if (got.model().family == Family::PeriodicGrid) {
    double scale = 0.0;
    for (double x : b) scale = std::max(scale, std::abs(x));
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    return worst;
  }
  // Warped and SU(2) storage are lengths; compare the squared (metric) values.
  const bool squared = got.model().family == Family::WarpedSphere;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (b[i] == 0.0) continue;
    const double ratio = squared ? (a[i] * a[i]) / (b[i] * b[i]) : a[i] / b[i];
    worst = std::max(worst, std::abs(ratio - 1.0));
  }
  return worst;
}

FlowConfig quiet_config(MetricField g, double horizon, double dt) {
  FlowConfig c;
  c.initial = std::move(g);
  c.time_horizon = horizon;
  c.fixed_dt = dt;
  c.stop_on_monitor_breach = false;
  c.track_diameter = false;
  c.track_energy = false;
  c.track_sobolev = false;
  return c;
}

OracleOutcome oracle_einstein() {
  const int n = 3;
  const double t = 0.2;
  const auto g0 = build_warped_sphere_metric(n, 32, {ProfileKind::Round, 1.0, 0.0});
  const auto trace = run_flow(quiet_config(g0, t, 1e-4));
  const auto& last = trace.states.back();
  const auto expected = exact_solution_oracle(OracleCase::EinsteinShrinker, g0, last.t, n - 1.0);
  OracleOutcome out{"einstein", relative_storage_error(last.metric, expected), 1e-6, false, ""};
  out.detail = "round S^3, dt=1e-4, t=" + format17(last.t);
  out.pass = out.max_deviation <= out.tolerance;
  return out;
}

OracleOutcome oracle_flat() {
  const auto g0 = build_torus_metric(3, 8, 1.0, {});
  const auto config = quiet_config(g0, 1.0, 1e-4);
  const auto trace = run_flow(config);
  double worst = relative_storage_error(trace.states.back().metric, g0);
  for (const auto& x : trace.series) worst = std::max(worst, x.sup_rm);
  OracleOutcome out{"flat", worst, 1e-14, false, ""};
  out.detail = "flat T^3, " + std::to_string(trace.steps) + " steps";
  out.pass = out.max_deviation <= out.tolerance;
  return out;
}

OracleOutcome oracle_berger() {
  const auto g0 = build_su2_metric(0.25, 1.0, 1.0);
  const double horizon = 0.02;
  const auto coarse = run_flow(quiet_config(g0, horizon, 1e-3)).states.back().metric.triple();
  const auto fine = run_flow(quiet_config(g0, horizon, 5e-4)).states.back().metric.triple();
  double worst = 0.0;
  for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(coarse[i] - fine[i]));
  OracleOutcome out{"berger", worst, 1e-8, false, "Berger (0.25,1,1), dt=1e-3 vs 5e-4 to t=0.02"};
  out.pass = out.max_deviation <= out.tolerance;
  return out;
}

OracleOutcome oracle_heat() {
  const int res = 16;
  const double h = 1.0 / res;
  const auto g = build_torus_metric(3, res, 1.0, {});
  const auto& model = g.model();
  const double k2 = 4.0 * std::numbers::pi * std::numbers::pi;
  SubsolutionPair pair;
  pair.metrics.push_back(g);
  for (int k = 0; k <= 100; ++k) {
    const double t = k * 1e-4;
    std::vector<double> f(model.node_count());
    for (std::size_t p = 0; p < f.size(); ++p) {
      const double x = model.coords(p)[0] * h;
      f[p] = 1.0 + std::exp(-k2 * t) * std::cos(2.0 * std::numbers::pi * x);
    }
    pair.times.push_back(t);
    pair.f.push_back(std::move(f));
    pair.u.emplace_back(model.node_count(), 0.0);
  }
  const double bound = 5.0 * k2 * k2 * h * h / 12.0;
  const auto report = verify_subsolution(pair, bound);
  OracleOutcome out{"heat-eigenmode", report.max_residual, bound, report.pass,
                    "flat T^3 res 16, dt=1e-4, t in [0, 0.01]"};
  return out;
}

OracleOutcome oracle_schedule() {
  const auto s = iteration_schedule(2.0, 4, 6.0, 1.0, 1.0, 3);
  const double dev = std::max(std::abs(s[1].tau - 0.703704), std::abs(s[1].r - 0.648148));
  OracleOutcome out{"moser-schedule", dev, 1e-6, false, "n=4, q=6: tau_1, r_1"};
  out.pass = out.max_deviation <= out.tolerance;
  return out;
}

}  // namespace

ScenarioConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  ScenarioConfig c;
  ObjectReader top(doc, "", {"name", "manifold", "flow", "verification", "output", "seed"});
  top.read("name", c.name);
  if (top.has("seed")) {
    const auto& v = top.at("seed");
    if (!v.is_number_unsigned()) throw ConfigError("seed: expected a nonnegative integer");
    c.seed = v.get<std::uint64_t>();
  }
  if (!top.has("manifold")) throw ConfigError("manifold: missing section");
  {
    ObjectReader m(top.at("manifold"), "manifold",
                   {"family", "dim", "resolution", "side_length", "epsilon_p", "wave", "profile",
                    "rho", "profile_epsilon", "abc"});
    auto& s = c.manifold;
    m.read("family", s.family);
    m.read("dim", s.dim);
    m.read("resolution", s.resolution);
    m.read("side_length", s.side_length);
    m.read("epsilon_p", s.epsilon_p);
    m.read("profile", s.profile);
    m.read("rho", s.rho);
    m.read("profile_epsilon", s.profile_epsilon);
    if (m.has("wave")) {
      const auto& w = m.at("wave");
      if (!w.is_array()) throw ConfigError("manifold.wave: expected an array of integers");
      s.wave.clear();
      for (const auto& x : w) {
        if (!x.is_number_integer()) throw ConfigError("manifold.wave: expected an array of integers");
        s.wave.push_back(x.get<int>());
      }
    }
    if (m.has("abc")) {
      const auto& w = m.at("abc");
      if (!w.is_array() || w.size() != 3) throw ConfigError("manifold.abc: expected three numbers");
      for (int i = 0; i < 3; ++i) {
        if (!w[i].is_number()) throw ConfigError("manifold.abc: expected three numbers");
        s.abc[i] = w[i].get<double>();
      }
    }
  }
  if (top.has("flow")) {
    ObjectReader f(top.at("flow"), "flow",
                   {"ricci_bound", "ball_radius", "energy_threshold", "time_horizon", "dt_safety",
                    "deturck", "stop_on_monitor_breach", "fixed_dt", "cadence", "dense_centers",
                    "track_diameter", "track_energy", "track_sobolev", "snapshot_stride",
                    "sobolev_starts"});
    f.read("ricci_bound", c.ricci_bound);
    f.read("ball_radius", c.ball_radius);
    f.read("energy_threshold", c.energy_threshold);
    f.read("time_horizon", c.time_horizon);
    f.read("dt_safety", c.dt_safety);
    f.read("deturck", c.deturck);
    f.read("stop_on_monitor_breach", c.stop_on_monitor_breach);
    f.read("fixed_dt", c.fixed_dt);
    f.read("cadence", c.cadence);
    f.read("dense_centers", c.dense_centers);
    f.read("track_diameter", c.track_diameter);
    f.read("track_energy", c.track_energy);
    f.read("track_sobolev", c.track_sobolev);
    f.read("snapshot_stride", c.snapshot_stride);
    f.read("sobolev_starts", c.sobolev_starts);
  }
  if (top.has("verification")) {
    ObjectReader v(top.at("verification"), "verification",
                   {"smoothing", "monitors", "diameter", "almost_flat"});
    v.read("smoothing", c.verification.smoothing);
    v.read("monitors", c.verification.monitors);
    v.read("diameter", c.verification.diameter);
    if (v.has("almost_flat")) {
      const auto& a = v.at("almost_flat");
      if (a.is_boolean() && !a.get<bool>()) {
        c.verification.almost_flat = false;
      } else {
        ObjectReader af(a, "verification.almost_flat", {"t0", "eps0"});
        if (!af.has("t0")) throw ConfigError("verification.almost_flat.t0: missing");
        af.read("t0", c.verification.t0);
        af.read("eps0", c.verification.eps0);
        c.verification.almost_flat = true;
      }
    }
  }
  if (top.has("output")) {
    ObjectReader o(top.at("output"), "output", {"dir"});
    o.read("dir", c.output_dir);
  }
  validate_config(c);
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string config_to_json(const ScenarioConfig& c) {
  json m = {{"family", c.manifold.family},
            {"dim", c.manifold.dim},
            {"resolution", c.manifold.resolution},
            {"side_length", c.manifold.side_length},
            {"epsilon_p", c.manifold.epsilon_p},
            {"wave", c.manifold.wave},
            {"profile", c.manifold.profile},
            {"rho", c.manifold.rho},
            {"profile_epsilon", c.manifold.profile_epsilon},
            {"abc", c.manifold.abc}};
  json f = {{"ricci_bound", c.ricci_bound},
            {"ball_radius", c.ball_radius},
            {"energy_threshold", c.energy_threshold},
            {"time_horizon", c.time_horizon},
            {"dt_safety", c.dt_safety},
            {"deturck", c.deturck ? json(*c.deturck) : json(nullptr)},
            {"stop_on_monitor_breach", c.stop_on_monitor_breach},
            {"fixed_dt", c.fixed_dt ? json(*c.fixed_dt) : json(nullptr)},
            {"cadence", c.cadence},
            {"dense_centers", c.dense_centers},
            {"track_diameter", c.track_diameter},
            {"track_energy", c.track_energy},
            {"track_sobolev", c.track_sobolev},
            {"snapshot_stride", c.snapshot_stride},
            {"sobolev_starts", c.sobolev_starts}};
  json v = {{"smoothing", c.verification.smoothing},
            {"monitors", c.verification.monitors},
            {"diameter", c.verification.diameter}};
  v["almost_flat"] = c.verification.almost_flat
                         ? json{{"t0", c.verification.t0}, {"eps0", c.verification.eps0}}
                         : json(false);
  json doc = {{"name", c.name},       {"manifold", m},
              {"flow", f},            {"verification", v},
              {"output", {{"dir", c.output_dir}}}, {"seed", c.seed}};
  return doc.dump(2);
}

void validate_config(const ScenarioConfig& c) {
  const auto& m = c.manifold;
  require(m.family == "torus" || m.family == "sphere" || m.family == "su2",
          "manifold.family: expected torus, sphere or su2");
  if (m.family == "su2") {
    require(m.dim == 3, "manifold.dim: su2 is three-dimensional");
    for (double x : m.abc) require(x > 0.0, "manifold.abc: entries must be positive");
  } else {
    require(m.dim >= 3 && m.dim <= kMaxDim, "manifold.dim: must lie in [3, 6]");
    require(m.resolution >= 4, "manifold.resolution: must be >= 4");
  }
  if (m.family == "torus") {
    require(m.side_length > 0.0, "manifold.side_length: must be positive");
    require(m.epsilon_p >= 0.0, "manifold.epsilon_p: must be >= 0");
    require(m.wave.empty() || static_cast<int>(m.wave.size()) == m.dim,
            "manifold.wave: needs one entry per axis");
  }
  if (m.family == "sphere") {
    require(m.profile == "round" || m.profile == "perturbed",
            "manifold.profile: expected round or perturbed");
    require(m.rho > 0.0, "manifold.rho: must be positive");
  }
  require(c.ball_radius > 0.0, "flow.ball_radius: must be positive");
  require(c.time_horizon > 0.0, "flow.time_horizon: must be positive");
  require(c.sobolev_starts >= 1, "flow.sobolev_starts: must be >= 1");
  if (c.verification.almost_flat) {
    require(c.verification.eps0 > 0.0, "verification.almost_flat.eps0: must be positive");
    require(c.verification.t0 > 0.0 && c.verification.t0 <= c.time_horizon,
            "verification.almost_flat.t0: must lie in (0, time_horizon]");
  }
  require(!c.output_dir.empty(), "output.dir: must not be empty");
  try {
    build_initial_metric(m);
  } catch (const Error& e) {
    throw ConfigError(std::string("manifold: ") + e.what());
  }
  try {
    to_flow_config(c).validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  } catch (const DegenerateMetric& e) {
    throw ConfigError(std::string("manifold: ") + e.what());
  }
}

MetricField build_initial_metric(const ManifoldSpec& s) {
  if (s.family == "torus") {
    return build_torus_metric(s.dim, s.resolution, s.side_length, {s.epsilon_p, s.wave});
  }
  if (s.family == "sphere") {
    const auto kind = s.profile == "round" ? ProfileKind::Round : ProfileKind::PerturbedRound;
    return build_warped_sphere_metric(s.dim, s.resolution, {kind, s.rho, s.profile_epsilon});
  }
  return build_su2_metric(s.abc[0], s.abc[1], s.abc[2]);
}

FlowConfig to_flow_config(const ScenarioConfig& c) {
  FlowConfig f;
  f.initial = build_initial_metric(c.manifold);
  f.ricci_bound = c.ricci_bound;
  f.ball_radius = c.ball_radius;
  f.energy_threshold = c.energy_threshold;
  f.time_horizon = c.time_horizon;
  f.dt_safety = c.dt_safety;
  f.deturck = c.deturck;
  f.stop_on_monitor_breach = c.stop_on_monitor_breach;
  f.fixed_dt = c.fixed_dt;
  f.cadence = c.cadence;
  f.dense_centers = c.dense_centers;
  f.track_diameter = c.track_diameter;
  f.track_energy = c.track_energy;
  f.track_sobolev = c.track_sobolev;
  f.snapshot_stride = c.snapshot_stride;
  f.sobolev.starts = c.sobolev_starts;
  f.sobolev.seed = c.seed;
  return f;
}

VerifyOptions effective_verification(const ScenarioConfig& c) {
  auto v = c.verification;
  if (c.manifold.family == "su2" || !c.track_diameter) v.diameter = false;
  if (v.almost_flat && (c.manifold.family == "su2" || !c.track_diameter)) v.almost_flat = false;
  return v;
}

void apply_parameter(ScenarioConfig& c, const std::string& parameter, double value) {
  if (parameter == "epsilon_p") {
    c.manifold.epsilon_p = value;
  } else if (parameter == "resolution") {
    require(value == std::floor(value), "sweep: resolution values must be integers");
    c.manifold.resolution = static_cast<int>(value);
  } else if (parameter == "dt_safety") {
    c.dt_safety = value;
  } else if (parameter == "r") {
    c.ball_radius = value;
  } else {
    throw ConfigError("sweep: unknown parameter '" + parameter +
                      "' (expected epsilon_p, resolution, dt_safety or r)");
  }
  validate_config(c);
}

std::string trace_csv(const FlowTrace& trace) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& x : trace.series) {
    const double row[] = {x.t, x.sup_rm, x.sup_ric, x.dev, x.lambda_min, x.lambda_max,
                          x.diam, x.e0, x.sobolev};
    for (std::size_t i = 0; i < 9; ++i) {
      if (i) out += ',';
      out += format17(row[i]);
    }
    out += '\n';
  }
  return out;
}

std::vector<SeriesSample> parse_trace_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw ConfigError("trace csv: unexpected header");
  }
  std::vector<SeriesSample> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<double> v;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      char* end = nullptr;
      const double x = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0') {
        throw ConfigError("trace csv: bad number on row " + std::to_string(row));
      }
      v.push_back(x);
    }
    if (v.size() != 9) throw ConfigError("trace csv: expected 9 columns on row " + std::to_string(row));
    out.push_back({v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]});
  }
  if (out.empty()) throw ConfigError("trace csv: no rows");
  return out;
}

FlowTrace trace_from_series(const ScenarioConfig& config, std::vector<SeriesSample> series) {
  FlowTrace trace;
  trace.model = build_initial_metric(config.manifold).model();
  trace.ball_radius = config.ball_radius;
  trace.series = std::move(series);
  trace.final_time = trace.series.back().t;
  trace.sobolev_initial = trace.series.front().sobolev;
  trace.e0_initial = trace.series.front().e0;
  return trace;
}

std::string report_json(const EstimateReport& report, const FlowTrace& trace) {
  json checks = json::array();
  for (const auto& c : report.checks) {
    checks.push_back({{"name", c.name},
                      {"display", c.display},
                      {"fitted_constant", number_or_null(c.fitted_constant)},
                      {"worst_margin", number_or_null(c.worst_margin)},
                      {"pass", c.pass},
                      {"note", c.note}});
  }
  json fits = json::array();
  for (const auto& f : report.exponent_fits) {
    fits.push_back({{"series", f.series},
                    {"slope", number_or_null(f.slope)},
                    {"target", f.target},
                    {"stderr", number_or_null(f.stderr_slope)},
                    {"samples", f.samples},
                    {"window", {f.t_lo, f.t_hi}}});
  }
  json run = {{"termination", to_string(trace.termination)},
              {"breach", trace.breach},
              {"failure", trace.failure},
              {"steps", trace.steps},
              {"cadence", trace.cadence},
              {"samples", trace.series.size()},
              {"final_time", trace.final_time}};
  json initial = {{"energy", number_or_null(trace.initial_energy)},
                  {"smallness_ok", trace.smallness_ok},
                  {"ric_term", number_or_null(trace.initial_ric_term)},
                  {"sobolev", number_or_null(trace.sobolev_initial)},
                  {"e0", number_or_null(trace.e0_initial)}};
  json doc = {{"checks", checks}, {"exponent_fits", fits}, {"run", run}, {"initial", initial}};
  if (trace.sobolev_initial > 0.0 && !trace.series.empty()) {
    const auto p = prop23_check(trace);
    doc["envelopes"] = {{"f_envelope", number_or_null(p.f_envelope)},
                        {"u_envelope", number_or_null(p.u_envelope)}};
  }
  if (!report.config_echo.empty()) doc["config"] = json::parse(report.config_echo);
  doc["all_pass"] = report.all_pass();
  return doc.dump(2) + "\n";
}

int exit_code_for(const FlowTrace& trace, const EstimateReport& report) {
  if (trace.termination == Termination::CurvatureBlowup ||
      trace.termination == Termination::StepUnderflow) {
    return 3;
  }
  if (trace.termination == Termination::MonitorBreach) return 1;
  return report.all_pass() ? 0 : 1;
}

ScenarioResult run_scenario(const ScenarioConfig& config) {
  ScenarioResult out;
  out.trace = run_flow(to_flow_config(config));
  out.report = verify_trace(out.trace, effective_verification(config));
  out.report.config_echo = config_to_json(config);
  out.exit_code = exit_code_for(out.trace, out.report);
  return out;
}

std::vector<std::string> oracle_names() {
  return {"einstein", "flat", "berger", "heat-eigenmode", "moser-schedule"};
}

OracleOutcome run_oracle(const std::string& name) {
  if (name == "einstein") return oracle_einstein();
  if (name == "flat") return oracle_flat();
  if (name == "berger") return oracle_berger();
  if (name == "heat-eigenmode") return oracle_heat();
  if (name == "moser-schedule") return oracle_schedule();
  throw InvalidArgument("unknown oracle case '" + name + "'");
}

}  // namespace ricci
