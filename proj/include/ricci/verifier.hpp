#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "ricci/flow.hpp"

namespace ricci {

struct EstimateCheck {
  std::string name;
  std::string display;          // one of (1.4) (1.5) (1.6) (3.8) (3.9) (3.10) (4.1) (4.2)
  double fitted_constant = 0.0;
  double worst_margin = 0.0;    // NaN when the check has no margin
  bool pass = false;
  std::string note;
};

struct ExponentFit {
  std::string series;
  double slope = 0.0;
  double target = 0.0;
  double stderr_slope = 0.0;
  std::size_t samples = 0;
  double t_lo = 0.0;
  double t_hi = 0.0;
};

struct EstimateReport {
  std::vector<EstimateCheck> checks;
  std::vector<ExponentFit> exponent_fits;
  std::string config_echo;      // serialized scenario configuration

  bool all_pass() const;
  const EstimateCheck* find(const std::string& name) const;
};

struct SlopeFit {
  double slope = 0.0;
  double stderr_slope = 0.0;
  std::size_t samples = 0;
};

/// Least-squares slope of log(value) against log(t) over t in [t_lo, t_hi].
/// Needs >= 8 samples in the window; throws on nonpositive values there.
SlopeFit fit_exponent(const std::vector<std::pair<double, double>>& series, double t_lo,
                      double t_hi);

struct SmoothingChecks {
  std::vector<EstimateCheck> checks;
  std::vector<ExponentFit> fits;
};

/// dev / t^{2/(n+2)}, sup|Rm| t, sup|Ric| t^{n/(n+2)}. Needs >= 20 samples with t > 0.
SmoothingChecks check_smoothing_estimates(const FlowTrace& trace);

std::vector<EstimateCheck> check_monitors(const FlowTrace& trace);

EstimateCheck check_diameter(const FlowTrace& trace);

/// Lambda diam^2 at t0 with Lambda = sup|Rm|(t0); values between samples are
/// linearly interpolated.
EstimateCheck check_almost_flat(const FlowTrace& trace, double t0, double eps0);

struct VerifyOptions {
  bool smoothing = true;
  bool monitors = true;
  bool diameter = true;
  bool almost_flat = false;
  double t0 = 0.0;
  double eps0 = 1.0;
};

/// Runs the enabled checks; a check whose preconditions fail is reported as
/// failed with the reason in its note.
EstimateReport verify_trace(const FlowTrace& trace, const VerifyOptions& options);

}  // namespace ricci
