// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ricci/curvature.hpp"
#include "ricci/flow.hpp"
#include "ricci/localization.hpp"
#include "ricci/moser.hpp"
#include "ricci/scenario.hpp"
#include "ricci/sobolev.hpp"
#include "ricci/verifier.hpp"

using namespace ricci;

namespace {

constexpr double pi = std::numbers::pi;

// Every trace produced below, for the cross-run checks of criteria 8 and 9.
std::vector<FlowTrace> g_runs;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int g_failures = 0;

void criterion(int id, const char* name, double limit_s, const std::function<void(Outcome&)>& body) {
  Outcome out;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(out);
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail << " [exception: " << e.what() << "]";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (limit_s > 0.0 && secs >= limit_s) {
    out.pass = false;
    out.detail << " [over the " << limit_s << " s limit]";
  }
  if (!out.pass) ++g_failures;
  std::printf("criterion %d %s: %s (%s; %.2f s)\n", id, name, out.pass ? "PASS" : "FAIL",
              out.detail.str().c_str(), secs);
  std::fflush(stdout);
}

FlowConfig bare(MetricField g, double horizon) {
  FlowConfig c;
  c.initial = std::move(g);
  c.time_horizon = horizon;
  c.track_diameter = false;
  c.track_energy = false;
  c.track_sobolev = false;
  return c;
}

// Max over entries of |a^2/b^2 - 1|: warped storage holds the profile, the
// metric scales with its square.
double squared_relative(std::span<const double> a, std::span<const double> b) {
  double w = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (b[i] == 0.0) continue;
    w = std::max(w, std::abs((a[i] * a[i]) / (b[i] * b[i]) - 1.0));
  }
  return w;
}

// Ric of e^{2f} delta, f = eps sin(k m.x): -(n-2)(D^2 f - df df) - (Lap f + (n-2)|df|^2) delta
double conformal_ricci(int n, double eps, const std::array<int, 3>& m, const std::array<double, 3>& x,
                       int i, int j) {
  const double k = 2.0 * pi;
  double theta = 0.0, m2 = 0.0;
  for (int a = 0; a < n; ++a) {
    theta += k * m[a] * x[a];
    m2 += m[a] * m[a];
  }
  const double s = std::sin(theta), c = std::cos(theta);
  const double fi = eps * k * m[i] * c, fj = eps * k * m[j] * c;
  const double fij = -eps * k * k * m[i] * m[j] * s;
  double ric = -(n - 2) * (fij - fi * fj);
  if (i == j) ric -= -eps * k * k * m2 * s + (n - 2) * eps * eps * k * k * m2 * c * c;
  return ric;
}

double conformal_error(int res) {
  const std::array<int, 3> m{1, 0, 0};
  const double eps = 0.05;
  const auto g = build_torus_metric(3, res, 1.0, {eps, {1, 0, 0}});
  const auto b = compute_curvature(g);
  double worst = 0.0;
  for (std::size_t p = 0; p < g.model().node_count(); ++p) {
    const auto c = g.model().coords(p);
    const std::array<double, 3> x{c[0] * g.model().spacing, c[1] * g.model().spacing, c[2] * g.model().spacing};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) worst = std::max(worst, std::abs(b.ric(p, i, j) - conformal_ricci(3, eps, m, x, i, j)));
  }
  return worst;
}

double series_distance(const FlowTrace& a, const FlowTrace& b) {
  if (a.series.size() != b.series.size()) return std::numeric_limits<double>::infinity();
  double w = 0.0;
  for (std::size_t k = 0; k < a.series.size(); ++k) {
    const auto& x = a.series[k];
    const auto& y = b.series[k];
    for (auto f : {&SeriesSample::t, &SeriesSample::sup_rm, &SeriesSample::sup_ric, &SeriesSample::dev,
                   &SeriesSample::lambda_min, &SeriesSample::lambda_max, &SeriesSample::diam, &SeriesSample::e0,
                   &SeriesSample::sobolev}) {
      const double d = std::abs(x.*f - y.*f);
      if (std::isnan(x.*f) && std::isnan(y.*f)) continue;
      w = std::max(w, std::isnan(d) ? std::numeric_limits<double>::infinity() : d);
    }
  }
  return w;
}

// Moser heat pair: f = 1 + e^{-4 pi^2 t} cos(2 pi x_1), u = 0 on the flat unit 3-torus.
SubsolutionPair heat_pair(int res, double dt, int steps) {
  SubsolutionPair pair;
  const auto g = build_torus_metric(3, res, 1.0, {});
  pair.metrics = {g};
  const double k = 2.0 * pi;
  for (int s = 0; s <= steps; ++s) {
    const double t = s * dt;
    pair.times.push_back(t);
    std::vector<double> f(g.model().node_count());
    for (std::size_t p = 0; p < f.size(); ++p) {
      f[p] = 1.0 + std::exp(-k * k * t) * std::cos(k * g.model().coords(p)[0] * g.model().spacing);
    }
    pair.f.push_back(std::move(f));
    pair.u.emplace_back(g.model().node_count(), 0.0);
  }
  return pair;
}

}  // namespace

int main() {
  criterion(1, "einstein shrinker", 5.0, [](Outcome& o) {
    for (int n : {3, 5}) {
      const auto g0 = build_warped_sphere_metric(n, 32, {ProfileKind::Round, 1.0, 0.0});
      auto c = bare(g0, 0.2 / (n - 1));
      c.fixed_dt = 1e-4;
      c.cadence = 1;
      c.snapshot_stride = 1;
      c.stop_on_monitor_breach = false;
      const auto tr = run_flow(c);
      double worst = 0.0;
      for (const auto& s : tr.states) {
        const auto want = exact_solution_oracle(OracleCase::EinsteinShrinker, g0, s.t, n - 1.0);
        worst = std::max(worst, squared_relative(s.metric.values(), want.values()));
      }
      o.detail << "n=" << n << " states " << tr.states.size() << " max rel " << worst << "; ";
      o.require(tr.termination == Termination::HorizonReached, "horizon not reached");
      o.require(tr.states.size() == tr.steps + 1, "missing snapshots");
      o.require(worst <= 1e-6, "deviation above 1e-6");
    }
  });

  criterion(2, "flat fixed point", 10.0, [](Outcome& o) {
    const auto g0 = build_torus_metric(3, 8, 1.0, {});
    auto c = bare(g0, 1.0);
    c.fixed_dt = 1e-4;
    const auto tr = run_flow(c);
    double sup = 0.0;
    for (const auto& x : tr.series) sup = std::max(sup, x.sup_rm);
    const auto& g = tr.states.back().metric;
    double dev = 0.0;
    for (std::size_t i = 0; i < g.values().size(); ++i) dev = std::max(dev, std::abs(g.values()[i] - g0.values()[i]));
    o.detail << "steps " << tr.steps << " max sup|Rm| " << sup << " max |g-g0| " << dev;
    o.require(tr.steps == 10000, "step count");
    o.require(sup == 0.0, "nonzero curvature");
    o.require(dev == 0.0, "metric moved");
    g_runs.push_back(tr);
  });

  criterion(3, "tensor symmetries", 30.0, [](Outcome& o) {
    const MetricField metrics[] = {
        build_torus_metric(3, 16, 1.0, {}),
        build_torus_metric(3, 16, 1.0, {0.05, {}}),
        build_warped_sphere_metric(3, 64, {ProfileKind::Round, 1.0, 0.0}),
        build_su2_metric(0.25, 1, 1),
    };
    const char* names[] = {"flat", "eps 0.05", "sphere", "berger"};
    for (int k = 0; k < 4; ++k) {
      const auto& g = metrics[k];
      const auto d = curvature_defects(compute_curvature(g));
      const double tol = g.model().family == Family::PeriodicGrid ? 1e-10 : 1e-12;
      const double worst = std::max({d.antisymmetry, d.pair_symmetry, d.bianchi, d.ricci_symmetry,
                                     d.ricci_trace, d.scalar_trace});
      o.detail << names[k] << " " << worst << "; ";
      o.require(worst <= tol, std::string(names[k]) + " identity defect");
      o.require(d.norm_negative == 0.0, std::string(names[k]) + " negative norm");
    }
  });

  criterion(4, "stencil order", 60.0, [](Outcome& o) {
    const double e12 = conformal_error(12), e24 = conformal_error(24);
    o.detail << "err12 " << e12 << " err24 " << e24 << " ratio " << e12 / e24;
    o.require(e12 / e24 >= 3.5, "ratio below 3.5");
  });

  criterion(5, "smoothing estimates", 120.0, [](Outcome& o) {
    const auto cfg = load_config(RICCI_CONFIG_DIR "/torus_eps005.json");
    const auto a = run_scenario(cfg);
    const auto b = run_scenario(cfg);
    auto coarse_cfg = cfg;
    apply_parameter(coarse_cfg, "resolution", 12);
    const auto coarse = run_scenario(coarse_cfg);
    g_runs.push_back(a.trace);
    g_runs.push_back(coarse.trace);

    o.require(a.trace.termination == Termination::HorizonReached, "run stopped early");
    for (const char* name : {"metric_equivalence", "sobolev_drift", "energy_doubling"}) {
      const auto* m = a.report.find(name);
      o.require(m != nullptr && m->pass, std::string(name) + " breached");
    }
    for (const char* name : {"smoothing_metric", "smoothing_rm", "smoothing_ric"}) {
      const auto* x = a.report.find(name);
      const auto* y = b.report.find(name);
      const auto* z = coarse.report.find(name);
      if (!x || !y || !z) {
        o.require(false, std::string(name) + " missing");
        continue;
      }
      const double rel = std::abs(z->fitted_constant / x->fitted_constant - 1.0);
      o.detail << name << " " << x->fitted_constant << " (res12 " << z->fitted_constant << "); ";
      o.require(std::isfinite(x->fitted_constant), std::string(name) + " not finite");
      o.require(std::abs(x->fitted_constant - y->fitted_constant) <= 1e-12, std::string(name) + " rerun differs");
      o.require(rel <= 0.25, std::string(name) + " res 12 vs 16 off by more than 25%");
    }
    const double rerun = series_distance(a.trace, b.trace);
    o.detail << "rerun series diff " << rerun;
    o.require(rerun <= 1e-12, "rerun series differ");
  });

  criterion(6, "monitor breach", 0.0, [](Outcome& o) {
    FlowConfig c;
    c.initial = build_warped_sphere_metric(3, 64, {ProfileKind::Round, 1.0, 0.0});
    c.time_horizon = 0.2;
    c.ball_radius = 0.5;
    c.track_sobolev = false;
    const auto tr = run_flow(c);
    g_runs.push_back(tr);
    o.require(tr.termination == Termination::MonitorBreach, "no breach");
    o.require(tr.breach == "(3.8)", "wrong monitor '" + tr.breach + "'");
    if (tr.series.size() < 2) {
      o.require(false, "too few samples");
      return;
    }
    const auto& last = tr.series.back();
    const double gap = last.t - tr.series[tr.series.size() - 2].t;
    bool first = last.t > 0.125;
    for (std::size_t k = 0; k + 1 < tr.series.size(); ++k) first = first && tr.series[k].t <= 0.125;
    o.detail << "breach " << tr.breach << " at t " << last.t << " cadence gap " << gap;
    o.require(first, "not the first sample past t = 0.125");
    o.require(last.t - 0.125 <= gap, "later than one cadence interval");
  });

  criterion(7, "moser mechanics", 0.0, [](Outcome& o) {
    // (a) p_k = p0 (1 + 2/n)^k, tau_k = t (1 - eta^{-k/2}), r_k = r (1 + eta^{-k/2}) / 2
    {
      const int n = 4;
      const double q = 6.0, p0 = 2.0, t = 1.0, r = 1.0;
      const double eta = std::pow(1.0 + 2.0 / n, 2.0 * q / (q - n));
      const auto s = iteration_schedule(p0, n, q, t, r, 8);
      double dev = std::abs(s[1].tau - 0.703704) + std::abs(s[1].r - 0.648148);
      for (int k = 0; k <= 8; ++k) {
        const double shrink = std::pow(eta, -k / 2.0);
        dev = std::max({dev, std::abs(s[k].p - p0 * std::pow(1.5, k)), std::abs(s[k].tau - t * (1.0 - shrink)),
                        std::abs(s[k].r - r * (1.0 + shrink) / 2.0)});
      }
      o.detail << "(a) schedule dev " << dev << "; ";
      o.require(dev <= 1e-6, "(a) schedule");
    }
    const auto pair = heat_pair(16, 1e-4, 100);
    // (b) truncation of the 3-point Laplacian on cos(2 pi x), h^2 k^4 / 12 with slack 5
    {
      const double h = 1.0 / 16;
      const double bound = 5.0 * std::pow(2.0 * pi, 4) * h * h / 12.0;
      const auto r = verify_subsolution(pair, bound);
      o.detail << "(b) residual " << r.max_residual << " bound " << bound << "; ";
      o.require(r.pass && r.max_residual <= bound, "(b) heat residual");
    }
    // (c)
    {
      MoserParams m;
      m.n = 3;
      m.q = 5;
      m.p = 2;
      m.r = 0.3;
      m.t = 0.01;
      m.mu = 0.0;
      const double base = verify_max_principle(pair, m, 0).C_required;
      double worst = 0.0;
      for (double c : {0.5, 2.0}) {
        auto scaled = pair;
        for (auto& f : scaled.f)
          for (double& v : f) v *= c;
        worst = std::max(worst, std::abs(verify_max_principle(scaled, m, 0).C_required - base));
      }
      o.detail << "(c) C_required " << base << " scale drift " << worst << "; ";
      o.require(std::isfinite(base) && worst <= 1e-9, "(c) scale invariance");
    }
    // (d)
    {
      int violations = 0, comparisons = 0;
      for (int n : {3, 4})
        for (double p : {1.5, 2.0, 3.0})
          for (double t : {0.05, 0.2, 1.0, 3.0})
            for (double r : {0.1, 0.5, 1.0, 2.0})
              for (double mu : {0.0, 0.5, 1.0, 2.0})
                for (double A : {1.0, 1.5, 3.0, 10.0}) {
                  MoserParams m;
                  m.n = n;
                  m.q = n + 2.0;
                  m.p = p;
                  m.t = t;
                  m.r = r;
                  m.mu = mu;
                  m.A = A;
                  const double base = moser_bound(m, 1.0);
                  auto at = [&](MoserParams x) { return moser_bound(x, 1.0); };
                  auto x = m;
                  x.t *= 1.5;
                  violations += at(x) > base;
                  x = m;
                  x.r *= 1.5;
                  violations += at(x) > base;
                  x = m;
                  x.mu += 0.5;
                  violations += at(x) < base;
                  x = m;
                  x.A *= 1.5;
                  violations += at(x) < base;
                  comparisons += 4;
                }
      o.detail << "(d) " << violations << " violations in " << comparisons;
      o.require(violations == 0, "(d) monotonicity");
    }
  });

  criterion(8, "e0 and covering", 0.0, [](Outcome& o) {
    int decreases = 0;
    for (const auto& run : g_runs)
      for (std::size_t k = 1; k < run.series.size(); ++k) decreases += run.series[k].e0 < run.series[k - 1].e0;
    o.detail << "e0 decreases " << decreases << " over " << g_runs.size() << " runs; ";
    o.require(decreases == 0, "e0 decreased");

    const auto g = build_torus_metric(3, 10, 1.0, {});
    GraphDistances dist(g);
    std::mt19937_64 rng(kDefaultSeed);
    std::uniform_int_distribution<std::size_t> pick(0, g.model().node_count() - 1);
    std::uniform_real_distribution<double> radius(0.21, 0.4);
    std::size_t bad = 0;
    for (int k = 0; k < 20; ++k) bad += cover_violations(dist, gromov_cover(dist, pick(rng), radius(rng)));
    o.detail << "cover violations " << bad << "; N(r)";
    o.require(bad == 0, "cover invariants");

    const auto g24 = build_torus_metric(3, 24, 1.0, {});
    GraphDistances d24(g24);
    std::size_t prev = std::numeric_limits<std::size_t>::max();
    for (double r : {0.1, 0.2, 0.3}) {
      const auto n = gromov_cover(d24, 0, r).count;
      o.detail << " " << n;
      o.require(n <= prev, "N increased with r");
      prev = n;
    }
  });

  criterion(9, "diameter control", 0.0, [](Outcome& o) {
    FlowConfig c;
    c.initial = build_warped_sphere_metric(3, 64, {ProfileKind::Round, 1.0, 0.0});
    c.time_horizon = 0.1;
    c.stop_on_monitor_breach = false;
    c.track_sobolev = false;
    c.track_energy = false;
    const auto tr = run_flow(c);
    g_runs.push_back(tr);
    const double frozen = 0.6416;
    const double sphere_c = check_diameter(tr).fitted_constant;
    int recorded = 0;
    for (const auto& run : g_runs) {
      if (run.series.empty() || !std::isfinite(run.series.front().diam) || run.series.front().diam == 0.0) continue;
      ++recorded;
      const double cst = check_diameter(run).fitted_constant;
      o.require(std::isfinite(cst), "non-finite constant");
    }
    o.detail << "sphere c " << sphere_c << " vs " << frozen << "; finite on " << recorded << " runs";
    o.require(recorded >= 3, "too few runs with a diameter series");
    o.require(std::abs(sphere_c / frozen - 1.0) <= 0.01, "sphere constant off by more than 1%");
  });

  criterion(10, "sobolev estimator", 0.0, [](Outcome& o) {
    auto at = [](const MetricField& g, std::size_t x) {
      return sobolev_constant(ball(geodesic_distance(g, x), 0.25, g), g);
    };
    const auto g16 = build_torus_metric(3, 16, 1.0, {});
    const auto g24 = build_torus_metric(3, 24, 1.0, {});
    const double a = at(g16, 0), b = at(g24, 0);
    const auto& m = g16.model();
    double shift = 0.0;
    for (std::array<int, 3> c : {std::array<int, 3>{5, 3, 11}, std::array<int, 3>{15, 15, 0}}) {
      shift = std::max(shift, std::abs(at(g16, m.index(c)) - a));
    }
    const double a4 = sobolev_constant(ball(geodesic_distance(g16, 0), 0.25, g16), g16.scaled(4.0));
    const double scale_err = std::abs(a4 / a - std::pow(4.0, sobolev_scaling_exponent(3)));
    o.detail << "A16 " << a << " A24 " << b << " shift " << shift << " scaling err " << scale_err;
    o.require(std::abs(a / b - 1.0) <= 0.10, "res 16 vs 24");
    o.require(shift <= 1e-9, "translation");
    o.require(scale_err <= 1e-9, "scaling");
  });

  std::printf("%d of 10 criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
