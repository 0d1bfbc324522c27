#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ricci {

inline constexpr int kMaxDim = 6;

enum class Family { PeriodicGrid, WarpedSphere, HomogeneousSU2 };

std::string to_string(Family family);

/// Discretization of a closed manifold.
///
/// PeriodicGrid: the flat torus R^n / (L Z)^n sampled on resolution^n nodes,
/// spacing L / resolution, every axis wraps.
///
/// WarpedSphere: S^n written as psi(x)^2 dx^2 + phi(x)^2 g_{S^{n-1}} over
/// x in [0, pi*rho]; resolution is the number of intervals, so there are
/// resolution + 1 radial nodes with both poles included.
///
/// HomogeneousSU2: left-invariant metrics on SU(2) = S^3, a single "node".
struct ManifoldModel {
  Family family = Family::PeriodicGrid;
  int dim = 3;
  int resolution = 0;
  double side_length = 0.0;  // torus period, or pi*rho for the warped sphere
  double spacing = 0.0;

  static ManifoldModel periodic_grid(int dim, int resolution, double side_length);
  static ManifoldModel warped_sphere(int dim, int resolution, double rho);
  static ManifoldModel homogeneous_su2();

  std::size_t node_count() const;
  /// Lattice coordinates of a PeriodicGrid node (axis 0 varies fastest).
  std::array<int, kMaxDim> coords(std::size_t node) const;
  /// Node index of wrapped lattice coordinates.
  std::size_t index(std::span<const int> coords) const;
  /// Node reached by moving `offset` lattice steps along every axis, wrapping.
  std::size_t shifted(std::size_t node, std::span<const int> offset) const;
  std::size_t shifted(std::size_t node, int axis, int steps) const;
  /// Radial coordinate x of a WarpedSphere node.
  double radial_coordinate(std::size_t node) const;

  bool operator==(const ManifoldModel&) const = default;
};

/// The flow's state variable. Storage depends on the family:
///   PeriodicGrid   : node-major symmetric n x n blocks g_ij(x)
///   WarpedSphere   : [psi_0 .. psi_N, phi_0 .. phi_N]
///   HomogeneousSU2 : (a, b, c) in the Milnor frame
class MetricField {
 public:
  MetricField() = default;
  MetricField(ManifoldModel model, std::vector<double> values);

  const ManifoldModel& model() const { return model_; }
  int dim() const { return model_.dim; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  std::span<const double> node_matrix(std::size_t node) const;
  double g(std::size_t node, int i, int j) const;

  std::span<const double> stretch() const;  // psi, radial factor
  std::span<const double> warp() const;     // phi, sphere factor
  std::array<double, 3> triple() const;

  /// c * g for a constant c > 0.
  MetricField scaled(double c) const;

 private:
  ManifoldModel model_;
  std::vector<double> values_;
};

/// Conformal perturbation e^{2 amplitude sin(2 pi m.x / L)} of the flat torus.
struct ConformalPerturbation {
  double amplitude = 0.0;
  std::vector<int> wave;  // m, one integer per axis; empty means (1, 0, ..., 0)
};

enum class ProfileKind { Round, PerturbedRound };

struct WarpProfile {
  ProfileKind kind = ProfileKind::Round;
  double rho = 1.0;
  double epsilon = 0.0;  // PerturbedRound only
};

MetricField build_torus_metric(int dim, int resolution, double side_length,
                               const ConformalPerturbation& perturbation);
MetricField build_warped_sphere_metric(int dim, int resolution, const WarpProfile& profile);
MetricField build_su2_metric(double a, double b, double c);

/// Warped metric from explicit samples; validates positivity and pole regularity.
MetricField make_warped_metric(const ManifoldModel& model, std::vector<double> stretch,
                               std::vector<double> warp);

inline constexpr double kPoleRegularityTol = 1e-8;
inline constexpr double kDegenerateEigenvalue = 1e-10;

/// Throws DegenerateMetric if any node fails symmetry or positive definiteness.
void validate_metric(const MetricField& g);

/// Smallest eigenvalue over nodes (warped: min of psi^2 and interior phi^2 ratios).
double min_metric_eigenvalue(const MetricField& g);

/// Arc length parameter s(x) = integral_0^x psi for every warped node.
std::vector<double> warped_arclength(const MetricField& g);

/// Area of the unit (k)-sphere embedded in R^{k+1}.
double unit_sphere_area(int k);

}  // namespace ricci
