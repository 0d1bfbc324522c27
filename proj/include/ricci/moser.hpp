#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ricci/flow.hpp"
#include "ricci/manifold.hpp"

namespace ricci {

struct MoserParams {
  int n = 3;
  double q = 5.0;      // > n
  double p = 2.0;      // > 1
  double A = 1.0;      // Sobolev constant
  double mu = 0.0;     // coefficient bounding t^{(q-n)/q} |u|_{q/2}
  double r = 1.0;
  double t = 1.0;
  double C_cal = 1.0;  // stands in for the symbolic constant C(n, q, p)

  void validate() const;
};

struct ScheduleEntry {
  int k = 0;
  double p = 0.0;
  double tau = 0.0;
  double r = 0.0;
};

/// nu = 1 + 2/n, p_k = p0 nu^k, tau_k = (1 - nu^{-qk/(q-n)}) t,
/// r_k = (1 + nu^{-qk/(q-n)}) r / 2, for k = 0..k_max.
std::vector<ScheduleEntry> iteration_schedule(double p0, int n, double q, double t, double r,
                                              int k_max);

/// nu^{2q/(q-n)}, the per-step growth factor of the iteration's constants.
double ratio_eta(int n, double q);

/// C A^{n/(2p)} ((1 + A^{n/(q-n)} mu^{q/(q-n)})/t + 1/r^2)^{(n+2)/(2p)} * lp.
double moser_bound(const MoserParams& params, double spacetime_lp);

/// Exponent (n+2)/(2p) of the bracket in moser_bound.
double moser_outer_exponent(int n, double p);

/// Fields f, u sampled at increasing times on a sequence of metrics
/// (a single metric means a stationary background).
struct SubsolutionPair {
  std::vector<double> times;
  std::vector<MetricField> metrics;
  std::vector<std::vector<double>> f;
  std::vector<std::vector<double>> u;
  double c_n = 0.0;
  double C0 = 0.0;

  const MetricField& metric_at(std::size_t k) const {
    return metrics.size() == 1 ? metrics.front() : metrics[k];
  }
};

struct SubsolutionReport {
  double max_residual = 0.0;  // max of d_t f - Lap f - u f
  bool pass = false;
  std::size_t samples = 0;
};

/// Second-order time differences (centered inside, one-sided at the ends).
SubsolutionReport verify_subsolution(const SubsolutionPair& pair, double tolerance);

struct MaxPrincipleOptions {
  /// Integrate f^p over [0, t]; false integrates over the whole record.
  bool integrate_to_t = true;
};

struct MaxPrincipleResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double C_required = 0.0;
  double spacetime_lp = 0.0;
  double measured_mu = 0.0;
};

/// lhs = f(center, t); rhs = moser_bound with C = 1 and the measured
/// (int int_{B_r} f^p dv dt)^{1/p}; C_required = lhs / rhs.
/// Throws InvalidArgument if the measured mu exceeds params.mu.
MaxPrincipleResult verify_max_principle(const SubsolutionPair& pair, const MoserParams& params,
                                        std::size_t center, const MaxPrincipleOptions& options = {});

/// Measured mu = max over samples t > 0 of t^{(q-n)/q} (int_{B_r} u^{q/2} dv_t)^{2/q}.
double measured_mu(const SubsolutionPair& pair, int n, double q, double r, std::size_t center);

/// f + 1/j.
std::vector<double> regularize_low_p(std::span<const double> f, int j);

struct Prop23Params {
  std::optional<double> A;  // default: the trace's initial Sobolev estimate
};

struct Prop23Result {
  double f_envelope = 0.0;  // max_t t sup|Rm|
  double u_envelope = 0.0;  // max_t t^{n/(n+2)} sup|Ric| / (A^{n/(n+2)} [Ric0 term + r^{-4/(n+2)} e0])
  bool smallness_ok = true;
};

Prop23Result prop23_check(const FlowTrace& trace, const Prop23Params& params = {});

}  // namespace ricci
