#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace ricci {

/// Collocation derivatives on the nodes x_j = j L / N, j = 0..N.
///
/// Odd fields (vanishing at both ends, like the warp factor phi) are expanded
/// in sin(k pi x / L); even fields (psi, radial scalars) in cos(k pi x / L).
/// Both expansions are exact for the round sphere, which keeps the Einstein
/// shrinker at round-off level.
class SpectralLine {
 public:
  SpectralLine(int intervals, double length);

  /// Shared, cached instance for (intervals, length).
  static std::shared_ptr<const SpectralLine> get(int intervals, double length);

  int intervals() const { return n_; }
  double length() const { return length_; }

  /// order-th derivative of an odd field sampled at all N+1 nodes.
  std::vector<double> odd_derivative(std::span<const double> f, int order) const;
  /// order-th derivative of an even field sampled at all N+1 nodes.
  std::vector<double> even_derivative(std::span<const double> f, int order) const;
  /// integral_0^{x_j} f dx for an even field, at every node.
  std::vector<double> even_cumulative_integral(std::span<const double> f) const;

 private:
  int n_;
  double length_;
  // Row-major (N+1) x (N+1) differentiation matrices, index by order-1.
  std::vector<double> odd_d_[3];
  std::vector<double> even_d_[2];
  std::vector<double> even_int_;
};

}  // namespace ricci
