#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ricci/localization.hpp"
#include "ricci/manifold.hpp"

namespace ricci {

inline constexpr std::uint64_t kDefaultSeed = 0x5EED;

struct SobolevOptions {
  int starts = 20;
  std::uint64_t seed = kDefaultSeed;
  double rel_tol = 1e-6;
  int max_iterations = 4000;
};

struct SobolevResult {
  double estimate = 0.0;
  /// Maximizer over the ball members, in the ball's canonical order.
  std::vector<double> optimizer;
  int iterations = 0;
};

/// Discrete quotient ||u||^2_{2n/(n-2)} / ||grad u||^2_2 for u given on the
/// ball members (canonical order) and zero elsewhere.
///
/// Grid: w_x = sqrt(det g) h^n, gradient by forward differences contracted
/// with g^{ab}(x). Warped: radial functions on a polar ball, trapezoid mass
/// and midpoint stiffness in x.
double sobolev_quotient(const Ball& b, const MetricField& g, std::span<const double> u);

/// Canonical member order used by sobolev_quotient: members sorted by their
/// minimal-image lattice offset from the center (radial index for warped).
std::vector<std::size_t> canonical_members(const Ball& b, const MetricField& g);

/// Multi-start projected gradient ascent of the quotient over u >= 0.
/// A nonempty warm start replaces the random starts with a single run.
SobolevResult estimate_sobolev(const Ball& b, const MetricField& g,
                               const SobolevOptions& options = {},
                               std::span<const double> warm_start = {});

/// Best-constant estimate (max over starts). Requires >= 10 interior nodes.
double sobolev_constant(const Ball& b, const MetricField& g, const SobolevOptions& options = {});

/// Exponent e with A(c g) = c^e A(g) for the discrete quotient. Volumes pick
/// up c^{n/2}, squared gradients c^{-1}, so e = (n-2)/2 - (n/2 - 1) = 0.
double sobolev_scaling_exponent(int n);

}  // namespace ricci
