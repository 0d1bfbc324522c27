#include "ricci/moser.hpp"

#include <algorithm>
#include <cmath>

#include "ricci/error.hpp"
#include "ricci/localization.hpp"

namespace ricci {

namespace {

// First derivative at sample k from a three-point Lagrange stencil.
double time_derivative(const std::vector<double>& t, const std::vector<std::vector<double>>& f,
                       std::size_t k, std::size_t node) {
  const std::size_t last = t.size() - 1;
  std::size_t i0 = k == 0 ? 0 : (k == last ? last - 2 : k - 1);
  const double x0 = t[i0], x1 = t[i0 + 1], x2 = t[i0 + 2];
  const double y0 = f[i0][node], y1 = f[i0 + 1][node], y2 = f[i0 + 2][node];
  const double x = t[k];
  const double l0 = ((x - x1) + (x - x2)) / ((x0 - x1) * (x0 - x2));
  const double l2 = ((x - x0) + (x - x1)) / ((x2 - x0) * (x2 - x1));
  // weights sum to zero; difference form keeps constants exact
  return l0 * (y0 - y1) + l2 * (y2 - y1);
}

void check_pair(const SubsolutionPair& pair) {
  const std::size_t samples = pair.times.size();
  if (samples < 3) throw InvalidArgument("subsolution: need at least 3 time samples");
  if (pair.f.size() != samples || pair.u.size() != samples) {
    throw InvalidArgument("subsolution: field count does not match the time samples");
  }
  if (pair.metrics.size() != 1 && pair.metrics.size() != samples) {
    throw InvalidArgument("subsolution: need one metric or one per sample");
  }
  for (std::size_t k = 1; k < samples; ++k) {
    if (!(pair.times[k] > pair.times[k - 1])) throw InvalidArgument("subsolution: times must increase");
  }
}

std::size_t sample_at(const std::vector<double>& times, double t) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (std::abs(times[k] - t) < std::abs(times[best] - t)) best = k;
  }
  if (std::abs(times[best] - t) > 1e-9 * std::max(1.0, std::abs(t))) {
    throw InvalidArgument("max principle: t is not a recorded sample time");
  }
  return best;
}

}  // namespace

void MoserParams::validate() const {
  if (n < 3) throw InvalidArgument("moser: n must be >= 3");
  if (!(q > n)) throw InvalidArgument("moser: q must exceed n");
  if (!(p > 1.0)) throw InvalidArgument("moser: p must exceed 1");
  if (!(A > 0.0)) throw InvalidArgument("moser: A must be positive");
  if (!(mu >= 0.0)) throw InvalidArgument("moser: mu must be >= 0");
  if (!(t > 0.0)) throw InvalidArgument("moser: t must be positive");
  if (!(r > 0.0)) throw InvalidArgument("moser: r must be positive");
  if (!(C_cal > 0.0)) throw InvalidArgument("moser: C must be positive");
}

std::vector<ScheduleEntry> iteration_schedule(double p0, int n, double q, double t, double r,
                                              int k_max) {
  if (!(q > n)) throw InvalidArgument("iteration_schedule: q must exceed n");
  if (!(p0 >= 1.0)) throw InvalidArgument("iteration_schedule: p0 must be >= 1");
  if (k_max < 1) throw InvalidArgument("iteration_schedule: k_max must be >= 1");
  const double nu = 1.0 + 2.0 / n;
  const double decay = q / (q - n);
  std::vector<ScheduleEntry> out;
  for (int k = 0; k <= k_max; ++k) {
    const double shrink = std::pow(nu, -decay * k);
    out.push_back({k, p0 * std::pow(nu, k), (1.0 - shrink) * t, (1.0 + shrink) * r / 2.0});
  }
  return out;
}

double ratio_eta(int n, double q) {
  if (!(q > n)) throw InvalidArgument("ratio_eta: q must exceed n");
  return std::pow(1.0 + 2.0 / n, 2.0 * q / (q - n));
}

double moser_outer_exponent(int n, double p) { return (n + 2) / (2.0 * p); }

double moser_bound(const MoserParams& params, double spacetime_lp) {
  params.validate();
  if (!(spacetime_lp >= 0.0)) throw InvalidArgument("moser_bound: L^p norm must be >= 0");
  const int n = params.n;
  const double q = params.q;
  const double growth = 1.0 + std::pow(params.A, n / (q - n)) * std::pow(params.mu, q / (q - n));
  const double bracket = growth / params.t + 1.0 / (params.r * params.r);
  return params.C_cal * std::pow(params.A, n / (2.0 * params.p)) *
         std::pow(bracket, moser_outer_exponent(n, params.p)) * spacetime_lp;
}

SubsolutionReport verify_subsolution(const SubsolutionPair& pair, double tolerance) {
  check_pair(pair);
  SubsolutionReport out;
  out.max_residual = -std::numeric_limits<double>::infinity();
  const std::size_t samples = pair.times.size();
  std::optional<CurvatureBundle> fixed;
  if (pair.metrics.size() == 1) fixed = compute_curvature(pair.metrics.front());
  for (std::size_t k = 0; k < samples; ++k) {
    const auto& g = pair.metric_at(k);
    const auto lap = fixed ? laplacian(*fixed, g, pair.f[k])
                           : laplacian(compute_curvature(g), g, pair.f[k]);
    for (std::size_t x = 0; x < pair.f[k].size(); ++x) {
      if (pair.f[k][x] < 0.0 || pair.u[k][x] < 0.0) {
        throw InvalidArgument("subsolution: f and u must be nonnegative");
      }
      const double r = time_derivative(pair.times, pair.f, k, x) - lap[x] - pair.u[k][x] * pair.f[k][x];
      out.max_residual = std::max(out.max_residual, r);
      ++out.samples;
    }
  }
  out.pass = out.max_residual <= tolerance;
  return out;
}

double measured_mu(const SubsolutionPair& pair, int n, double q, double r, std::size_t center) {
  const auto& g0 = pair.metric_at(0);
  const Ball b = ball(geodesic_distance(g0, center, r), r, g0);
  double best = 0.0;
  for (std::size_t k = 0; k < pair.times.size(); ++k) {
    const double t = pair.times[k];
    if (!(t > 0.0)) continue;
    const double norm = ball_lp_norm(pair.u[k], 0.5 * q, b, pair.metric_at(k));
    best = std::max(best, std::pow(t, (q - n) / q) * norm);
  }
  return best;
}

MaxPrincipleResult verify_max_principle(const SubsolutionPair& pair, const MoserParams& params,
                                        std::size_t center, const MaxPrincipleOptions& options) {
  check_pair(pair);
  params.validate();
  MaxPrincipleResult out;
  out.measured_mu = measured_mu(pair, params.n, params.q, params.r, center);
  if (out.measured_mu > params.mu * (1.0 + 1e-12) + 1e-300) {
    throw InvalidArgument("max principle: measured mu exceeds the declared mu");
  }
  const std::size_t k_eval = sample_at(pair.times, params.t);
  const std::size_t k_end = options.integrate_to_t ? k_eval : pair.times.size() - 1;
  out.lhs = pair.f[k_eval][center];

  const auto& g0 = pair.metric_at(0);
  const Ball b = ball(geodesic_distance(g0, center, params.r), params.r, g0);
  // Trapezoid in time of int_{B_r} f^p dv_t.
  double integral = 0.0;
  double previous = 0.0;
  for (std::size_t k = 0; k <= k_end; ++k) {
    const double slice = std::pow(ball_lp_norm(pair.f[k], params.p, b, pair.metric_at(k)), params.p);
    if (k > 0) integral += 0.5 * (pair.times[k] - pair.times[k - 1]) * (slice + previous);
    previous = slice;
  }
  out.spacetime_lp = std::pow(integral, 1.0 / params.p);
  MoserParams unit = params;
  unit.C_cal = 1.0;
  out.rhs = moser_bound(unit, out.spacetime_lp);
  out.C_required = out.rhs > 0.0 ? out.lhs / out.rhs : 0.0;
  return out;
}

std::vector<double> regularize_low_p(std::span<const double> f, int j) {
  if (j < 1) throw InvalidArgument("regularize_low_p: j must be >= 1");
  std::vector<double> out(f.begin(), f.end());
  for (double& x : out) x += 1.0 / j;
  return out;
}

Prop23Result prop23_check(const FlowTrace& trace, const Prop23Params& params) {
  if (trace.series.empty()) throw InvalidArgument("prop23_check: empty trace");
  const int n = trace.dim();
  const double A = params.A.value_or(trace.sobolev_initial);
  const double r = trace.ball_radius;
  Prop23Result out;
  out.smallness_ok = trace.smallness_ok;
  const double a_factor = std::pow(A, n / (n + 2.0));
  const double r_factor = std::pow(r, -4.0 / (n + 2.0));
  for (const auto& x : trace.series) {
    if (!(x.t > 0.0)) continue;
    out.f_envelope = std::max(out.f_envelope, x.t * x.sup_rm);
    const double e0 = std::isfinite(x.e0) ? x.e0 : 0.0;
    const double denom = a_factor * (trace.initial_ric_term + r_factor * e0);
    const double numer = std::pow(x.t, n / (n + 2.0)) * x.sup_ric;
    if (numer == 0.0) continue;
    out.u_envelope = std::max(out.u_envelope, denom > 0.0 ? numer / denom
                                                          : std::numeric_limits<double>::infinity());
  }
  return out;
}

}  // namespace ricci
