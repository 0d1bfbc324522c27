#include "ricci/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ricci/error.hpp"

namespace ricci {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kSlopeTolerance = 0.15;
constexpr std::size_t kMinFitSamples = 8;

// Samples with t >= t_end/2 that form a positive, nonincreasing tail.
std::vector<std::pair<double, double>> decaying_window(const std::vector<std::pair<double, double>>& s) {
  if (s.empty()) return {};
  const double t_half = 0.5 * s.back().first;
  std::size_t begin = s.size();
  while (begin > 0) {
    const auto& cur = s[begin - 1];
    if (cur.first < t_half || !(cur.second > 0.0)) break;
    if (begin < s.size() && cur.second < s[begin].second) break;
    --begin;
  }
  return {s.begin() + static_cast<std::ptrdiff_t>(begin), s.end()};
}

EstimateCheck failed_check(std::string name, std::string display, const std::string& why) {
  return {std::move(name), std::move(display), kNaN, kNaN, false, why};
}

std::vector<std::pair<double, double>> positive_time_series(const FlowTrace& trace,
                                                            double SeriesSample::*field) {
  std::vector<std::pair<double, double>> out;
  for (const auto& x : trace.series) {
    if (x.t > 0.0) out.emplace_back(x.t, x.*field);
  }
  return out;
}

}  // namespace

bool EstimateReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

const EstimateCheck* EstimateReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

SlopeFit fit_exponent(const std::vector<std::pair<double, double>>& series, double t_lo,
                      double t_hi) {
  std::vector<double> x, y;
  for (const auto& [t, v] : series) {
    if (t < t_lo || t > t_hi) continue;
    if (!(t > 0.0) || !(v > 0.0)) throw InvalidArgument("fit_exponent: nonpositive value in window");
    x.push_back(std::log(t));
    y.push_back(std::log(v));
  }
  const std::size_t m = x.size();
  if (m < kMinFitSamples) throw InvalidArgument("fit_exponent: fewer than 8 samples in window");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw InvalidArgument("fit_exponent: window spans a single time");
  SlopeFit out;
  out.slope = sxy / sxx;
  out.samples = m;
  double ssr = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double e = y[i] - my - out.slope * (x[i] - mx);
    ssr += e * e;
  }
  out.stderr_slope = std::sqrt(ssr / static_cast<double>(m - 2) / sxx);
  return out;
}

SmoothingChecks check_smoothing_estimates(const FlowTrace& trace) {
  const std::size_t positive = std::count_if(trace.series.begin(), trace.series.end(),
                                             [](const auto& x) { return x.t > 0.0; });
  if (positive < 20) throw InvalidArgument("smoothing check: fewer than 20 samples with t > 0");
  const int n = trace.dim();
  SmoothingChecks out;

  struct Spec {
    const char* name;
    const char* display;
    double SeriesSample::*field;
    double power;        // fitted constant = max value * t^power
    bool slope;
    double target;
  };
  const Spec specs[] = {
      {"smoothing_metric", "(1.4)", &SeriesSample::dev, -2.0 / (n + 2), false, 0.0},
      {"smoothing_rm", "(1.5)", &SeriesSample::sup_rm, 1.0, true, -1.0},
      {"smoothing_ric", "(1.6)", &SeriesSample::sup_ric, n / (n + 2.0), true, -n / (n + 2.0)},
  };
  for (const auto& s : specs) {
    const auto series = positive_time_series(trace, s.field);
    EstimateCheck check{s.name, s.display, 0.0, kNaN, true, ""};
    for (const auto& [t, v] : series) {
      check.fitted_constant = std::max(check.fitted_constant, v * std::pow(t, s.power));
    }
    if (!std::isfinite(check.fitted_constant)) {
      check.pass = false;
      check.note = "fitted constant is not finite";
    }
    if (s.slope) {
      const auto window = decaying_window(series);
      if (window.size() >= kMinFitSamples) {
        const auto fit = fit_exponent(window, window.front().first, window.back().first);
        out.fits.push_back({s.field == &SeriesSample::sup_rm ? "sup_rm" : "sup_ric", fit.slope,
                            s.target, fit.stderr_slope, fit.samples, window.front().first,
                            window.back().first});
        check.worst_margin = s.target + kSlopeTolerance - fit.slope;
        if (check.worst_margin < 0.0) {
          check.pass = false;
          check.note = "decay slope exceeds the target exponent";
        }
      } else if (check.note.empty()) {
        check.note = "no decaying window; slope not tested";
      }
    }
    out.checks.push_back(std::move(check));
  }
  return out;
}

std::vector<EstimateCheck> check_monitors(const FlowTrace& trace) {
  std::vector<EstimateCheck> out;
  double lmin = std::numeric_limits<double>::infinity();
  double lmax = -std::numeric_limits<double>::infinity();
  for (const auto& x : trace.series) {
    lmin = std::min(lmin, x.lambda_min);
    lmax = std::max(lmax, x.lambda_max);
  }
  {
    EstimateCheck c{"metric_equivalence", "(3.8)", std::max(lmax, 1.0 / lmin),
                    std::min(lmin - 0.5, 2.0 - lmax), false, ""};
    c.pass = lmin >= 0.5 && lmax <= 2.0;
    if (!c.pass) c.note = "metric left [g0/2, 2 g0]";
    out.push_back(std::move(c));
  }

  auto ratio_check = [&](const char* name, const char* display, double SeriesSample::*field,
                         double initial, double limit) {
    EstimateCheck c{name, display, 0.0, kNaN, true, ""};
    double peak = -std::numeric_limits<double>::infinity();
    bool tracked = false;
    for (const auto& x : trace.series) {
      if (std::isnan(x.*field)) continue;
      tracked = true;
      peak = std::max(peak, x.*field);
    }
    if (!tracked) {
      c.note = "not tracked";
      return c;
    }
    if (initial > 0.0) {
      c.fitted_constant = peak / initial;
    } else {
      c.fitted_constant = peak > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    }
    c.worst_margin = limit - c.fitted_constant;
    c.pass = c.fitted_constant <= limit;
    if (!c.pass) c.note = "ratio to the initial value exceeds the limit";
    return c;
  };
  out.push_back(ratio_check("sobolev_drift", "(3.9)", &SeriesSample::sobolev, trace.sobolev_initial, 4.0));
  out.push_back(ratio_check("energy_doubling", "(3.10)", &SeriesSample::e0, trace.e0_initial, 2.0));
  return out;
}

EstimateCheck check_diameter(const FlowTrace& trace) {
  if (trace.series.empty() || !std::isfinite(trace.series.front().diam)) {
    return failed_check("diameter_control", "(4.1)", "diameter series not recorded");
  }
  const double d0 = trace.series.front().diam;
  const double power = 2.0 / (trace.dim() + 2);
  EstimateCheck c{"diameter_control", "(4.1)", 0.0, kNaN, true, ""};
  for (const auto& x : trace.series) {
    if (!(x.t > 0.0)) continue;
    c.fitted_constant = std::max(c.fitted_constant, std::abs(std::log(x.diam / d0)) / std::pow(x.t, power));
  }
  c.pass = std::isfinite(c.fitted_constant);
  if (!c.pass) c.note = "fitted constant is not finite";
  return c;
}

EstimateCheck check_almost_flat(const FlowTrace& trace, double t0, double eps0) {
  if (trace.series.empty()) throw InvalidArgument("almost-flat check: empty trace");
  const auto& s = trace.series;
  if (!(t0 >= s.front().t && t0 <= s.back().t)) {
    throw InvalidArgument("almost-flat check: t0 outside the trace");
  }
  if (!(eps0 > 0.0)) throw InvalidArgument("almost-flat check: eps0 must be positive");
  std::size_t k = 0;
  while (k + 1 < s.size() && s[k + 1].t < t0) ++k;
  double rm = s[k].sup_rm;
  double diam = s[k].diam;
  if (k + 1 < s.size() && s[k].t < t0) {
    const double w = (t0 - s[k].t) / (s[k + 1].t - s[k].t);
    rm = (1.0 - w) * s[k].sup_rm + w * s[k + 1].sup_rm;
    diam = (1.0 - w) * s[k].diam + w * s[k + 1].diam;
  }
  EstimateCheck c{"almost_flat", "(4.2)", rm * diam * diam, 0.0, false, ""};
  c.worst_margin = eps0 - c.fitted_constant;
  c.pass = c.fitted_constant <= eps0;
  if (!std::isfinite(c.fitted_constant)) c.note = "diameter not recorded";
  return c;
}

EstimateReport verify_trace(const FlowTrace& trace, const VerifyOptions& options) {
  EstimateReport report;
  if (options.smoothing) {
    try {
      auto s = check_smoothing_estimates(trace);
      for (auto& c : s.checks) report.checks.push_back(std::move(c));
      report.exponent_fits = std::move(s.fits);
    } catch (const InvalidArgument& e) {
      report.checks.push_back(failed_check("smoothing_metric", "(1.4)", e.what()));
      report.checks.push_back(failed_check("smoothing_rm", "(1.5)", e.what()));
      report.checks.push_back(failed_check("smoothing_ric", "(1.6)", e.what()));
    }
  }
  if (options.monitors) {
    for (auto& c : check_monitors(trace)) report.checks.push_back(std::move(c));
  }
  if (options.diameter) report.checks.push_back(check_diameter(trace));
  if (options.almost_flat) {
    try {
      report.checks.push_back(check_almost_flat(trace, options.t0, options.eps0));
    } catch (const InvalidArgument& e) {
      report.checks.push_back(failed_check("almost_flat", "(4.2)", e.what()));
    }
  }
  return report;
}

}  // namespace ricci
