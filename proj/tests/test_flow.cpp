#include <doctest.h>

#include <cmath>
#include <string>

#include "ricci/error.hpp"
#include "ricci/flow.hpp"

using namespace ricci;

namespace {

FlowConfig bare(MetricField g, double horizon) {
  FlowConfig c;
  c.initial = std::move(g);
  c.time_horizon = horizon;
  c.track_diameter = false;
  c.track_energy = false;
  c.track_sobolev = false;
  return c;
}

double max_relative(std::span<const double> a, std::span<const double> b, bool squared) {
  double w = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (b[i] == 0.0) continue;
    const double r = squared ? (a[i] * a[i]) / (b[i] * b[i]) : a[i] / b[i];
    w = std::max(w, std::abs(r - 1.0));
  }
  return w;
}

}  // namespace

TEST_CASE("step leaves the flat torus fixed") {
  const auto g = build_torus_metric(3, 8, 1.0, {});
  for (bool gauge : {true, false}) {
    auto c = bare(g, 1.0);
    c.deturck = gauge;
    for (double dt : {1e-6, 1e-3, 0.5}) {
      const auto s = step(make_state(g), dt, c);
      for (std::size_t i = 0; i < g.values().size(); ++i) REQUIRE(s.metric.values()[i] == g.values()[i]);
    }
  }
  CHECK_THROWS_AS(step(make_state(g), 0.0, bare(g, 1.0)), InvalidArgument);
}

TEST_CASE("one RK4 step on the round sphere") {
  const auto g0 = build_warped_sphere_metric(3, 32, {ProfileKind::Round, 1.0, 0.0});
  const auto s = step(make_state(g0), 1e-4, bare(g0, 1.0));
  const auto want = exact_solution_oracle(OracleCase::EinsteinShrinker, g0, 1e-4, 2.0);
  CHECK(max_relative(s.metric.values(), want.values(), true) <= 1e-12);
  CHECK(s.t == 1e-4);
}

TEST_CASE("Berger step-halving") {
  const auto g0 = build_su2_metric(0.25, 1, 1);
  const auto c = bare(g0, 1.0);
  const auto one = step(make_state(g0), 1e-3, c);
  const auto two = step(step(make_state(g0), 5e-4, c), 5e-4, c);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(one.metric.triple()[i] - two.metric.triple()[i]) <= 1e-9);
}

TEST_CASE("RK4 global error drops by at least 15 when dt halves") {
  // Berger flow reference at dt = 1e-5.
  const auto g0 = build_su2_metric(0.25, 1, 1);
  auto integrate = [&](double dt) {
    auto s = make_state(g0);
    const int steps = static_cast<int>(std::lround(0.04 / dt));
    for (int k = 0; k < steps; ++k) s = step(s, dt, bare(g0, 1.0));
    return s.metric.triple();
  };
  const auto ref = integrate(1e-5);
  auto err = [&](double dt) {
    const auto x = integrate(dt);
    double w = 0.0;
    for (int i = 0; i < 3; ++i) w = std::max(w, std::abs(x[i] - ref[i]));
    return w;
  };
  const double e1 = err(4e-3), e2 = err(2e-3);
  MESSAGE("Berger errors " << e1 << " " << e2);
  CHECK(e1 / e2 >= 15.0);
}

TEST_CASE("suggest_dt formula") {
  const auto flat = build_torus_metric(3, 16, 1.0, {});
  const double h = 1.0 / 16;
  CHECK(suggest_dt(make_state(flat), bare(flat, 1.0)) == doctest::Approx(0.25 * h * h / 12.0).epsilon(1e-12));
  CHECK(suggest_dt(make_state(flat), bare(flat, 1.0)) == doctest::Approx(8.138e-5).epsilon(1e-3));

  // ODE family: 0.25 * 0.01 / sup|Rm|; scale the round S^3 so sup|Rm| = 100.
  const double c = std::sqrt(12.0) / 100.0;
  const auto su = build_su2_metric(c, c, c);
  const auto s = make_state(su);
  CHECK(tensor_sup_norms(s.curvature).rm == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(suggest_dt(s, bare(su, 1.0)) == doctest::Approx(2.5e-5).epsilon(1e-10));

  // Approaching collapse the suggestion shrinks monotonically.
  const auto s0 = build_warped_sphere_metric(3, 32, {ProfileKind::Round, 1.0, 0.0});
  double prev = std::numeric_limits<double>::infinity();
  for (double t = 0.0; t <= 0.24 + 1e-12; t += 0.02) {
    const auto st = make_state(exact_solution_oracle(OracleCase::EinsteinShrinker, s0, t, 2.0), t);
    const double dt = suggest_dt(st, bare(s0, 1.0));
    CHECK(dt < prev);
    prev = dt;
  }
}

TEST_CASE("run_flow on the flat torus") {
  auto c = bare(build_torus_metric(3, 8, 1.0, {}), 0.01);
  c.track_diameter = true;
  c.track_energy = true;
  const auto tr = run_flow(c);
  CHECK(tr.termination == Termination::HorizonReached);
  CHECK(tr.final_time == doctest::Approx(0.01).epsilon(1e-12));
  for (const auto& x : tr.series) {
    CHECK(x.sup_rm == 0.0);
    CHECK(x.e0 == 0.0);
    CHECK(x.lambda_min == 1.0);
  }
  for (std::size_t k = 1; k < tr.series.size(); ++k) CHECK(tr.series[k].t > tr.series[k - 1].t);
  CHECK(tr.states.front().t == 0.0);
  CHECK(tr.states.back().t == tr.final_time);
}

TEST_CASE("run_flow follows the round-sphere shrinker") {
  auto c = bare(build_warped_sphere_metric(3, 64, {ProfileKind::Round, 1.0, 0.0}), 0.2);
  c.stop_on_monitor_breach = false;
  const auto tr = run_flow(c);
  CHECK(tr.termination == Termination::HorizonReached);
  CHECK(tr.final_time == doctest::Approx(0.2).epsilon(1e-12));
  double worst = 0.0;
  for (const auto& x : tr.series) {
    worst = std::max(worst, std::abs(x.sup_ric / (2.0 * std::sqrt(3.0) / (1.0 - 4.0 * x.t)) - 1.0));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("monitor breach on the round sphere") {
  auto c = bare(build_warped_sphere_metric(3, 64, {ProfileKind::Round, 1.0, 0.0}), 0.2);
  const auto tr = run_flow(c);
  REQUIRE(tr.termination == Termination::MonitorBreach);
  CHECK(tr.breach == std::string(kMonitorMetric));
  const auto& last = tr.series.back();
  CHECK(last.t > 0.125);
  CHECK(last.lambda_min < 0.5);
  for (std::size_t k = 0; k + 1 < tr.series.size(); ++k) {
    CHECK(tr.series[k].t <= 0.125);
    CHECK(tr.series[k].lambda_min >= 0.5);
  }
  // The previous sample is at most one cadence interval before t = 0.125.
  const double gap = last.t - tr.series[tr.series.size() - 2].t;
  CHECK(last.t - 0.125 <= gap);
}

TEST_CASE("DeTurck field vanishes on the flat torus") {
  const auto g = build_torus_metric(3, 8, 1.0, {});
  for (double w : deturck_field(g, g)) CHECK(w == 0.0);
  const auto p = build_torus_metric(3, 8, 1.0, {0.05, {}});
  for (double w : deturck_field(p, p)) CHECK(w == 0.0);
}

TEST_CASE("exact solution oracle") {
  const auto g0 = build_su2_metric(1, 1, 1);
  const auto a = exact_solution_oracle(OracleCase::EinsteinShrinker, g0, 0.1, 2.0);
  CHECK(a.triple()[0] == doctest::Approx(0.6));
  const auto f = exact_solution_oracle(OracleCase::FlatStationary, g0, 5.0);
  CHECK(f.triple() == g0.triple());
  const auto s5 = build_warped_sphere_metric(5, 32, {ProfileKind::Round, 1.0, 0.0});
  const auto b = exact_solution_oracle(OracleCase::EinsteinShrinker, s5, 0.05, 4.0);
  const auto cmp = metric_comparison(b, s5);
  CHECK(cmp.lambda_min == doctest::Approx(0.6).epsilon(1e-12));
  CHECK_THROWS(exact_solution_oracle(OracleCase::EinsteinShrinker, g0, 0.25, 2.0));
}

TEST_CASE("flow config validation names the field") {
  FlowConfig c = bare(build_torus_metric(3, 8, 1.0, {}), 0.1);
  CHECK_NOTHROW(c.validate());
  auto expect = [](FlowConfig cfg, const std::string& field) {
    try {
      cfg.validate();
      FAIL("accepted an invalid config");
    } catch (const InvalidArgument& e) {
      CHECK(std::string(e.what()).find(field) != std::string::npos);
    }
  };
  auto bad = c;
  bad.ball_radius = -0.1;
  expect(bad, "ball_radius");
  bad = c;
  bad.time_horizon = 0.0;
  expect(bad, "time_horizon");
  bad = c;
  bad.dt_safety = 1.5;
  expect(bad, "dt_safety");
  bad = c;
  bad.ricci_bound = -1.0;
  expect(bad, "ricci_bound");
  CHECK(c.deturck_enabled());
  CHECK_FALSE(bare(build_su2_metric(1, 1, 1), 0.1).deturck_enabled());
}

TEST_CASE("curvature blowup is reported, not thrown") {
  // A Berger sphere run past collapse of the round factor.
  auto c = bare(build_su2_metric(1, 1, 1), 0.3);
  c.fixed_dt = 1e-3;
  c.stop_on_monitor_breach = false;
  const auto tr = run_flow(c);
  CHECK(tr.termination == Termination::CurvatureBlowup);
  CHECK_FALSE(tr.failure.empty());
  CHECK(tr.final_time < 0.25);
}
