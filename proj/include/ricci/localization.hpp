#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ricci/curvature.hpp"
#include "ricci/manifold.hpp"

namespace ricci {

/// Distances from one source node, measured in a given metric.
struct DistanceField {
  std::size_t source = 0;
  std::vector<double> distance;  // +inf beyond the search cutoff
};

/// Dijkstra over the 3^n - 1 lattice stencil (PeriodicGrid) or the meridian
/// arc length (WarpedSphere). Nodes farther than `cutoff` are left at +inf.
///
/// Grid edge lengths are rounded to a fixed binary lattice so path sums are
/// exact and dist(x, y) == dist(y, x) bit for bit.
DistanceField geodesic_distance(const MetricField& g, std::size_t source,
                                double cutoff = std::numeric_limits<double>::infinity());

/// Sublevel set of a distance field. Balls are cut in g0 and reused for
/// integrals against later metrics.
struct Ball {
  std::size_t center = 0;
  double radius = 0.0;
  std::vector<std::size_t> members;  // sorted by node index
  std::string metric_tag = "g0";
  /// WarpedSphere only: radial coordinate where the ball ends.
  double radial_cut = 0.0;
  bool contains(std::size_t node) const;
};

/// {node : dist <= r}. For the warped family the source must be a pole and
/// the ball remembers the exact cut radius for quadrature.
Ball ball(const DistanceField& dist, double r, const MetricField& g);

/// (integral over the ball of f^p dv_g)^{1/p}.
double ball_lp_norm(std::span<const double> f, double p, const Ball& b, const MetricField& g);

/// Volume of a ball in the metric g.
double ball_volume(const Ball& b, const MetricField& g);

/// (integral_B |Rm|^{n/2} dv_g)^{2/n}.
double local_energy(const CurvatureBundle& bundle, const Ball& b, const MetricField& g);

/// Maximum distance over a deterministic set of sources: {0, res/2}^n on the
/// grid (2^n >= 8 sources), the pole-to-pole length for the warped family.
double diameter(const MetricField& g);

/// Source of distance fields for the covering construction.
class DistanceProvider {
 public:
  virtual ~DistanceProvider() = default;
  virtual const DistanceField& from(std::size_t source) = 0;
  virtual std::size_t node_count() const = 0;
  /// Lattice spacing for the resolvability check; 0 when unknown.
  virtual double spacing() const { return 0.0; }
  /// Model used to order nodes by lattice offset; nullptr means index order.
  virtual const ManifoldModel* model() const { return nullptr; }
};

/// Memoizing provider backed by geodesic_distance on a fixed metric.
class GraphDistances : public DistanceProvider {
 public:
  explicit GraphDistances(MetricField g);
  const DistanceField& from(std::size_t source) override;
  std::size_t node_count() const override;
  double spacing() const override;
  const ManifoldModel* model() const override { return &g_.model(); }
  const MetricField& metric() const { return g_; }

 private:
  MetricField g_;
  std::map<std::size_t, DistanceField> cache_;
};

/// Covering of B_{2r}(x) by balls B_r(y_i) with every y_i in B_{3r/2}(x).
struct BallCover {
  std::size_t center = 0;
  double radius = 0.0;
  std::vector<std::size_t> target;   // nodes of B_{2r}(x), visiting order
  std::vector<std::size_t> centers;  // y_i in selection order
  std::size_t count = 0;
  int multiplicity = 0;
};

/// Greedy covering. Nodes are visited in lexicographic order of their
/// minimal-image lattice offset from x (last axis most significant), or in
/// index order when the provider has no grid model, so covers on the flat
/// torus are translation equivariant. Phase 1 walks the uncovered nodes of
/// B_{3r/2}(x) and makes each one a center. Phase 2 covers the remaining
/// shell nodes z of B_{2r}(x) \ B_{3r/2}(x) with the nearest node of
/// B_{3r/2}(x) to z (ties broken by visiting order).
/// Requires r > 2h when the provider knows its spacing h.
BallCover gromov_cover(DistanceProvider& distances, std::size_t x, double r);

/// Checks the two cover invariants against the provider; returns the number
/// of violations (uncovered target nodes plus misplaced centers).
std::size_t cover_violations(DistanceProvider& distances, const BallCover& cover);

/// Running sup of local energies on radius r/2 balls cut in g0 (e0(t)).
class EnergyTracker {
 public:
  /// `dense` uses every node as a center; otherwise 3^n stratified lattice
  /// centers plus the current max-|Rm| node (warped family: both poles).
  EnergyTracker(const MetricField& g0, double r, bool dense = false);

  double radius() const { return radius_; }
  double e0() const { return e0_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& history() const { return history_; }
  const std::vector<double>& instantaneous() const { return instant_; }
  bool dense() const { return dense_; }

  /// Sup over the centers of local_energy at this metric (no state change).
  double measure(const CurvatureBundle& bundle, const MetricField& g);
  /// Records one time sample and returns the updated e0.
  double update(double t, const CurvatureBundle& bundle, const MetricField& g);

 private:
  const Ball& ball_at(std::size_t node);

  MetricField g0_;
  double radius_ = 0.0;
  bool dense_ = false;
  std::vector<std::size_t> centers_;
  std::map<std::size_t, Ball> balls_;
  double e0_ = 0.0;
  std::vector<double> times_, history_, instant_;
};

struct FlowState;
/// Functional form: returns the tracker updated with the state's sample.
EnergyTracker track_e0(EnergyTracker tracker, const FlowState& state);

}  // namespace ricci
