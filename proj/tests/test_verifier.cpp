#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "ricci/error.hpp"
#include "ricci/flow.hpp"
#include "ricci/verifier.hpp"

using namespace ricci;

namespace {

// Round unit S^3 under the flow: g(t) = (1-4t) g0.
FlowTrace shrinker_trace(double t_end, int samples) {
  FlowTrace tr;
  tr.model = ManifoldModel::warped_sphere(3, 64, 1.0);
  tr.ball_radius = 0.5;
  for (int k = 0; k <= samples; ++k) {
    const double t = t_end * k / samples;
    const double s = 1.0 - 4.0 * t;
    SeriesSample x;
    x.t = t;
    x.sup_rm = std::sqrt(12.0) / s;
    x.sup_ric = 2.0 * std::sqrt(3.0) / s;
    x.dev = 4.0 * t;
    x.lambda_min = x.lambda_max = s;
    x.diam = std::numbers::pi * std::sqrt(s);
    x.e0 = 1.0;
    x.sobolev = std::numeric_limits<double>::quiet_NaN();
    tr.series.push_back(x);
  }
  tr.e0_initial = 1.0;
  tr.final_time = t_end;
  return tr;
}

FlowTrace torus_run(int res, double eps, double horizon) {
  FlowConfig c;
  c.initial = build_torus_metric(3, res, 1.0, {eps, {}});
  c.time_horizon = horizon;
  c.track_sobolev = false;
  c.cadence = 1;
  return run_flow(c);
}

}  // namespace

TEST_CASE("fit_exponent on power laws") {
  std::vector<std::pair<double, double>> inv, pw;
  for (int k = 1; k <= 40; ++k) {
    const double t = 0.01 * k;
    inv.emplace_back(t, 1.0 / t);
    pw.emplace_back(t, 7.0 * std::pow(t, 0.4));
  }
  const auto a = fit_exponent(inv, 0.0, 1.0);
  CHECK(std::abs(a.slope + 1.0) <= 1e-10);
  CHECK(a.samples == 40);
  CHECK(a.stderr_slope <= 1e-10);
  const auto b = fit_exponent(pw, 0.05, 0.3);
  CHECK(std::abs(b.slope - 0.4) <= 1e-9);
  CHECK(b.samples == 26);

  CHECK_THROWS_AS(fit_exponent(inv, 0.0, 0.075), InvalidArgument);
  auto bad = pw;
  bad[10].second = 0.0;
  CHECK_THROWS_AS(fit_exponent(bad, 0.0, 1.0), InvalidArgument);
  CHECK_NOTHROW(fit_exponent(bad, 0.12, 1.0));
}

TEST_CASE("fit_exponent on the bounded round-sphere Ricci series") {
  std::vector<std::pair<double, double>> s;
  for (int k = 1; k <= 100; ++k) {
    const double t = 0.001 * k;
    s.emplace_back(t, 2.0 * std::sqrt(3.0) / (1.0 - 4.0 * t));
  }
  const auto f = fit_exponent(s, 0.01, 0.1);
  MESSAGE("slope " << f.slope << " stderr " << f.stderr_slope);
  CHECK(f.slope >= 0.0);
  CHECK(f.slope <= 0.5);
}

TEST_CASE("checks on a flat trace") {
  FlowConfig c;
  c.initial = build_torus_metric(3, 8, 1.0, {});
  c.time_horizon = 0.01;
  c.cadence = 1;
  c.track_sobolev = false;
  const auto tr = run_flow(c);
  REQUIRE(tr.series.size() > 20);
  VerifyOptions opt;
  opt.almost_flat = true;
  opt.t0 = 0.005;
  opt.eps0 = 1e-6;
  const auto rep = verify_trace(tr, opt);
  CHECK(rep.all_pass());
  for (const char* name : {"smoothing_metric", "smoothing_rm", "smoothing_ric", "diameter_control", "almost_flat"}) {
    REQUIRE(rep.find(name));
    CHECK(rep.find(name)->fitted_constant == 0.0);
  }
  CHECK(rep.find("metric_equivalence")->worst_margin == 0.5);
  CHECK(rep.find("metric_equivalence")->fitted_constant == 1.0);
  CHECK(rep.find("energy_doubling")->fitted_constant == 0.0);
  CHECK(rep.find("sobolev_drift")->note == "not tracked");
  CHECK(rep.find("no_such_check") == nullptr);

  // every check carries its display
  const std::vector<std::pair<std::string, std::string>> displays{
      {"smoothing_metric", "(1.4)"}, {"smoothing_rm", "(1.5)"},      {"smoothing_ric", "(1.6)"},
      {"metric_equivalence", "(3.8)"}, {"sobolev_drift", "(3.9)"},   {"energy_doubling", "(3.10)"},
      {"diameter_control", "(4.1)"},   {"almost_flat", "(4.2)"}};
  CHECK(rep.checks.size() == displays.size());
  for (const auto& [name, display] : displays) CHECK(rep.find(name)->display == display);
}

TEST_CASE("round-sphere regression values") {
  const auto tr = shrinker_trace(0.2, 200);
  const auto s = check_smoothing_estimates(tr);
  // sup|Ric| t^{3/5} = 2 sqrt3 t^{3/5} / (1-4t), increasing, max at t = 0.2
  const double ric = 2.0 * std::sqrt(3.0) * std::pow(0.2, 0.6) / (1.0 - 0.8);
  CHECK(ric == doctest::Approx(6.594).epsilon(1e-4));
  CHECK(s.checks[2].fitted_constant == doctest::Approx(ric).epsilon(1e-12));
  CHECK(s.checks[1].fitted_constant == doctest::Approx(std::sqrt(12.0) * 0.2 / 0.2).epsilon(1e-12));
  CHECK(s.checks[0].fitted_constant == doctest::Approx(4.0 * std::pow(0.2, 0.6)).epsilon(1e-12));
  for (const auto& c : s.checks) CHECK(c.pass);
  CHECK(s.fits.empty());  // growing series: no decaying window

  // diameter: |log sqrt(1-4t)| / t^{2/5}, increasing, so the max sits at t = 0.1
  const auto d = check_diameter(shrinker_trace(0.1, 100));
  const double c = std::abs(std::log(std::sqrt(0.6))) / std::pow(0.1, 0.4);
  CHECK(c == doctest::Approx(0.6416).epsilon(1e-4));
  CHECK(d.fitted_constant == doctest::Approx(c).epsilon(1e-12));
  CHECK(d.pass);

  // Lambda diam^2 at t0 = 0.1: (sqrt12/0.6) pi^2 0.6 = sqrt12 pi^2
  const auto af = check_almost_flat(tr, 0.1, 1.0);
  CHECK(af.fitted_constant == doctest::Approx(std::sqrt(12.0) * std::numbers::pi * std::numbers::pi).epsilon(1e-12));
  CHECK(af.fitted_constant == doctest::Approx(34.19).epsilon(1e-3));
  CHECK_FALSE(af.pass);
}

TEST_CASE("round-sphere trace from the integrator") {
  FlowConfig c;
  c.initial = build_warped_sphere_metric(3, 64, {ProfileKind::Round, 1.0, 0.0});
  c.time_horizon = 0.1;
  c.stop_on_monitor_breach = false;
  c.track_sobolev = false;
  c.track_energy = false;
  const auto tr = run_flow(c);
  const auto d = check_diameter(tr);
  const double frozen = 0.6416;
  MESSAGE("fitted diameter constant " << d.fitted_constant);
  CHECK(std::abs(d.fitted_constant / frozen - 1.0) <= 0.01);
}

TEST_CASE("monitor breach on the shrinker") {
  const auto tr = shrinker_trace(0.13, 130);
  const auto m = check_monitors(tr);
  CHECK(m[0].name == "metric_equivalence");
  CHECK_FALSE(m[0].pass);
  CHECK(m[0].worst_margin == doctest::Approx(-0.02).epsilon(1e-9));
  CHECK(m[0].fitted_constant == doctest::Approx(1.0 / 0.48).epsilon(1e-12));
  CHECK(check_monitors(shrinker_trace(0.12, 120))[0].pass);
}

TEST_CASE("ratio monitors") {
  auto tr = shrinker_trace(0.1, 40);
  tr.sobolev_initial = 1.0;
  for (auto& x : tr.series) x.sobolev = 1.0 + 40.0 * x.t;  // peaks at 5
  tr.series[20].e0 = 2.5;
  const auto m = check_monitors(tr);
  CHECK_FALSE(m[1].pass);
  CHECK(m[1].fitted_constant == doctest::Approx(5.0));
  CHECK(m[1].worst_margin == doctest::Approx(-1.0));
  CHECK_FALSE(m[2].pass);
  CHECK(m[2].fitted_constant == doctest::Approx(2.5));
}

TEST_CASE("decay slope") {
  auto make = [](double power) {
    FlowTrace tr;
    tr.model = ManifoldModel::periodic_grid(3, 8, 1.0);
    for (int k = 0; k <= 60; ++k) {
      SeriesSample x;
      x.t = 0.001 * k;
      x.sup_rm = x.t > 0.0 ? std::pow(x.t, power) : 1e9;
      x.sup_ric = x.sup_rm;
      tr.series.push_back(x);
    }
    return tr;
  };
  const auto fast = check_smoothing_estimates(make(-1.5));
  REQUIRE(fast.fits.size() == 2);
  CHECK(fast.fits[0].slope == doctest::Approx(-1.5).epsilon(1e-9));
  CHECK(fast.fits[0].target == -1.0);
  CHECK(fast.fits[1].target == doctest::Approx(-0.6));
  CHECK(fast.checks[1].pass);
  CHECK(fast.checks[1].worst_margin == doctest::Approx(0.65));

  const auto slow = check_smoothing_estimates(make(-0.5));
  CHECK_FALSE(slow.checks[1].pass);
  CHECK(slow.checks[1].note == "decay slope exceeds the target exponent");
  CHECK(slow.checks[2].pass);  // -0.5 <= -0.6 + 0.15

  auto few = make(-1.0);
  few.series.resize(15);
  CHECK_THROWS_AS(check_smoothing_estimates(few), InvalidArgument);
  const auto rep = verify_trace(few, {});
  CHECK_FALSE(rep.find("smoothing_rm")->pass);
  CHECK(rep.find("smoothing_rm")->note.find("20") != std::string::npos);
}

TEST_CASE("fitted constants never shrink when the window grows") {
  const auto full = shrinker_trace(0.2, 200);
  double prev[4] = {0, 0, 0, 0};
  for (int end : {40, 80, 120, 160, 200}) {
    auto tr = full;
    tr.series.resize(end + 1);
    const auto s = check_smoothing_estimates(tr);
    const double now[4] = {s.checks[0].fitted_constant, s.checks[1].fitted_constant,
                           s.checks[2].fitted_constant, check_diameter(tr).fitted_constant};
    for (int i = 0; i < 4; ++i) {
      CHECK(now[i] >= prev[i]);
      prev[i] = now[i];
    }
  }
}

TEST_CASE("diameter and almost-flat preconditions") {
  auto tr = shrinker_trace(0.1, 20);
  for (auto& x : tr.series) x.diam = std::numeric_limits<double>::quiet_NaN();
  const auto d = check_diameter(tr);
  CHECK_FALSE(d.pass);
  CHECK(d.note == "diameter series not recorded");

  const auto ok = shrinker_trace(0.1, 20);
  CHECK_THROWS_AS(check_almost_flat(ok, 0.2, 1.0), InvalidArgument);
  CHECK_THROWS_AS(check_almost_flat(ok, 0.05, 0.0), InvalidArgument);
  // halfway between samples 0.05 and 0.055 the values are interpolated
  const auto mid = check_almost_flat(ok, 0.0525, 1e3);
  const auto& a = ok.series[10];
  const auto& b = ok.series[11];
  const double want = 0.5 * (a.sup_rm + b.sup_rm) * std::pow(0.5 * (a.diam + b.diam), 2);
  CHECK(mid.fitted_constant == doctest::Approx(want).epsilon(1e-14));
  CHECK(mid.pass);
}

TEST_CASE("perturbed torus checks") {
  const auto a = torus_run(8, 0.02, 0.05);
  const auto b = torus_run(8, 0.05, 0.05);
  const auto again = torus_run(8, 0.05, 0.05);
  VerifyOptions opt;
  opt.almost_flat = true;
  opt.t0 = 0.05;
  const auto ra = verify_trace(a, opt);
  const auto rb = verify_trace(b, opt);
  const auto rc = verify_trace(again, opt);
  for (const auto* r : {&ra, &rb}) {
    for (const auto& c : r->checks) {
      INFO(c.name << " " << c.note);
      CHECK(std::isfinite(c.fitted_constant));
    }
    CHECK(r->find("metric_equivalence")->pass);
    CHECK(r->find("energy_doubling")->pass);
  }
  for (std::size_t i = 0; i < rb.checks.size(); ++i) {
    CHECK(rb.checks[i].fitted_constant == rc.checks[i].fitted_constant);
  }
  const double da = ra.find("diameter_control")->fitted_constant;
  const double db = rb.find("diameter_control")->fitted_constant;
  const double fa = ra.find("almost_flat")->fitted_constant;
  const double fb = rb.find("almost_flat")->fitted_constant;
  MESSAGE("diameter c: " << da << " -> " << db << "; almost flat: " << fa << " -> " << fb);
  CHECK(db >= da);
  CHECK(fb >= fa);
  CHECK(fa < 1.0);
}
