#include "ricci/manifold.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ricci/error.hpp"
#include "ricci/small_matrix.hpp"
#include "ricci/spectral.hpp"

namespace ricci {

std::string to_string(Family family) {
  switch (family) {
    case Family::PeriodicGrid: return "torus";
    case Family::WarpedSphere: return "sphere";
    case Family::HomogeneousSU2: return "su2";
  }
  return "unknown";
}

ManifoldModel ManifoldModel::periodic_grid(int dim, int resolution, double side_length) {
  if (dim < 3 || dim > kMaxDim) throw InvalidArgument("dimension must be in [3, 6]");
  if (resolution < 8) throw InvalidArgument("resolution must be >= 8 (stencil underresolved)");
  if (!(side_length > 0.0)) throw InvalidArgument("side_length must be positive");
  ManifoldModel m;
  m.family = Family::PeriodicGrid;
  m.dim = dim;
  m.resolution = resolution;
  m.side_length = side_length;
  m.spacing = side_length / resolution;
  return m;
}

ManifoldModel ManifoldModel::warped_sphere(int dim, int resolution, double rho) {
  if (dim < 3 || dim > kMaxDim) throw InvalidArgument("dimension must be in [3, 6]");
  if (resolution < 32) throw InvalidArgument("warped sphere resolution must be >= 32");
  if (!(rho > 0.0)) throw InvalidArgument("rho must be positive");
  ManifoldModel m;
  m.family = Family::WarpedSphere;
  m.dim = dim;
  m.resolution = resolution;
  m.side_length = std::numbers::pi * rho;
  m.spacing = m.side_length / resolution;
  return m;
}

ManifoldModel ManifoldModel::homogeneous_su2() {
  ManifoldModel m;
  m.family = Family::HomogeneousSU2;
  m.dim = 3;
  return m;
}

std::size_t ManifoldModel::node_count() const {
  switch (family) {
    case Family::PeriodicGrid: {
      std::size_t count = 1;
      for (int a = 0; a < dim; ++a) count *= static_cast<std::size_t>(resolution);
      return count;
    }
    case Family::WarpedSphere: return static_cast<std::size_t>(resolution) + 1;
    case Family::HomogeneousSU2: return 1;
  }
  return 0;
}

std::array<int, kMaxDim> ManifoldModel::coords(std::size_t node) const {
  std::array<int, kMaxDim> c{};
  for (int a = 0; a < dim; ++a) {
    c[a] = static_cast<int>(node % resolution);
    node /= resolution;
  }
  return c;
}

std::size_t ManifoldModel::index(std::span<const int> c) const {
  std::size_t node = 0;
  for (int a = dim - 1; a >= 0; --a) {
    int v = c[a] % resolution;
    if (v < 0) v += resolution;
    node = node * resolution + static_cast<std::size_t>(v);
  }
  return node;
}

std::size_t ManifoldModel::shifted(std::size_t node, std::span<const int> offset) const {
  auto c = coords(node);
  for (int a = 0; a < dim; ++a) c[a] += offset[a];
  return index(std::span<const int>(c.data(), dim));
}

std::size_t ManifoldModel::shifted(std::size_t node, int axis, int steps) const {
  std::size_t stride = 1;
  for (int a = 0; a < axis; ++a) stride *= resolution;
  const int c = static_cast<int>((node / stride) % resolution);
  int moved = (c + steps) % resolution;
  if (moved < 0) moved += resolution;
  return node + (static_cast<std::size_t>(moved) - static_cast<std::size_t>(c)) * stride;
}

double ManifoldModel::radial_coordinate(std::size_t node) const {
  return static_cast<double>(node) * spacing;
}

MetricField::MetricField(ManifoldModel model, std::vector<double> values)
    : model_(model), values_(std::move(values)) {
  std::size_t expected = 0;
  switch (model_.family) {
    case Family::PeriodicGrid:
      expected = model_.node_count() * model_.dim * model_.dim;
      break;
    case Family::WarpedSphere: expected = 2 * model_.node_count(); break;
    case Family::HomogeneousSU2: expected = 3; break;
  }
  if (values_.size() != expected) throw InvalidArgument("MetricField: storage size mismatch");
}

std::span<const double> MetricField::node_matrix(std::size_t node) const {
  const std::size_t block = static_cast<std::size_t>(dim()) * dim();
  return std::span<const double>(values_).subspan(node * block, block);
}

double MetricField::g(std::size_t node, int i, int j) const {
  return values_[(node * dim() + i) * dim() + j];
}

std::span<const double> MetricField::stretch() const {
  return std::span<const double>(values_).first(model_.node_count());
}

std::span<const double> MetricField::warp() const {
  return std::span<const double>(values_).subspan(model_.node_count());
}

std::array<double, 3> MetricField::triple() const {
  return {values_[0], values_[1], values_[2]};
}

MetricField MetricField::scaled(double c) const {
  if (!(c > 0.0)) throw InvalidArgument("scale factor must be positive");
  std::vector<double> v = values_;
  // Warped storage holds lengths, so they scale with sqrt(c).
  const double factor = model_.family == Family::WarpedSphere ? std::sqrt(c) : c;
  for (double& x : v) x *= factor;
  return MetricField(model_, std::move(v));
}

MetricField build_torus_metric(int dim, int resolution, double side_length,
                               const ConformalPerturbation& perturbation) {
  if (!(std::abs(perturbation.amplitude) < 0.5)) {
    throw InvalidArgument("perturbation amplitude must satisfy |eps_p| < 0.5");
  }
  const auto model = ManifoldModel::periodic_grid(dim, resolution, side_length);
  std::vector<int> wave = perturbation.wave;
  if (wave.empty()) {
    wave.assign(dim, 0);
    wave[0] = 1;
  }
  if (static_cast<int>(wave.size()) != dim) {
    throw InvalidArgument("wave vector length must equal the dimension");
  }

  const std::size_t nodes = model.node_count();
  std::vector<double> values(nodes * dim * dim, 0.0);
  const double k = 2.0 * std::numbers::pi / side_length;
  for (std::size_t p = 0; p < nodes; ++p) {
    const auto c = model.coords(p);
    double phase = 0.0;
    for (int a = 0; a < dim; ++a) phase += wave[a] * c[a] * model.spacing;
    const double factor = std::exp(2.0 * perturbation.amplitude * std::sin(k * phase));
    for (int i = 0; i < dim; ++i) values[(p * dim + i) * dim + i] = factor;
  }
  return MetricField(model, std::move(values));
}

MetricField build_warped_sphere_metric(int dim, int resolution, const WarpProfile& profile) {
  const auto model = ManifoldModel::warped_sphere(dim, resolution, profile.rho);
  if (profile.kind == ProfileKind::PerturbedRound && !(std::abs(profile.epsilon) < 0.5)) {
    throw InvalidArgument("profile epsilon must satisfy |eps| < 0.5");
  }
  const std::size_t nodes = model.node_count();
  std::vector<double> stretch(nodes, 1.0);
  std::vector<double> warp(nodes, 0.0);
  const double rho = profile.rho;
  for (std::size_t j = 0; j < nodes; ++j) {
    // sin(j pi / N) is exactly zero at j = 0 only; pin the far pole as well.
    const double s = (j == nodes - 1) ? 0.0 : std::sin(model.radial_coordinate(j) / rho);
    double phi = rho * s;
    if (profile.kind == ProfileKind::PerturbedRound) phi *= 1.0 + profile.epsilon * s * s;
    warp[j] = phi;
  }
  return make_warped_metric(model, std::move(stretch), std::move(warp));
}

MetricField make_warped_metric(const ManifoldModel& model, std::vector<double> stretch,
                               std::vector<double> warp) {
  if (model.family != Family::WarpedSphere) throw InvalidArgument("not a warped model");
  const std::size_t nodes = model.node_count();
  if (stretch.size() != nodes || warp.size() != nodes) {
    throw InvalidArgument("warped metric: sample count mismatch");
  }
  if (std::abs(warp.front()) > kPoleRegularityTol || std::abs(warp.back()) > kPoleRegularityTol) {
    throw InvalidArgument("warp profile must vanish at both poles");
  }
  warp.front() = 0.0;
  warp.back() = 0.0;
  const auto line = SpectralLine::get(model.resolution, model.side_length);
  const auto dphi = line->odd_derivative(warp, 1);
  const double slope_north = dphi.front() / stretch.front();
  const double slope_south = dphi.back() / stretch.back();
  if (std::abs(slope_north - 1.0) > kPoleRegularityTol ||
      std::abs(slope_south + 1.0) > kPoleRegularityTol) {
    throw InvalidArgument("warp profile violates pole regularity phi'(0)=1, phi'(end)=-1");
  }
  std::vector<double> values = std::move(stretch);
  values.insert(values.end(), warp.begin(), warp.end());
  MetricField g(model, std::move(values));
  validate_metric(g);
  return g;
}

MetricField build_su2_metric(double a, double b, double c) {
  if (!(a > 0.0 && b > 0.0 && c > 0.0)) {
    throw InvalidArgument("SU(2) metric coefficients must be positive");
  }
  return MetricField(ManifoldModel::homogeneous_su2(), {a, b, c});
}

double min_metric_eigenvalue(const MetricField& g) {
  const auto& model = g.model();
  switch (model.family) {
    case Family::PeriodicGrid: {
      double lo = std::numeric_limits<double>::infinity();
      with_dim(g.dim(), [&]<int N>() {
        using Mat = Eigen::Matrix<double, N, N, Eigen::RowMajor>;
        for (std::size_t p = 0; p < model.node_count(); ++p) {
          const Mat m = Eigen::Map<const Mat>(g.node_matrix(p).data());
          Eigen::SelfAdjointEigenSolver<Mat> eig(m, Eigen::EigenvaluesOnly);
          lo = std::min(lo, eig.eigenvalues()(0));
        }
      });
      return lo;
    }
    case Family::WarpedSphere: {
      double lo = std::numeric_limits<double>::infinity();
      for (double psi : g.stretch()) lo = std::min(lo, psi * psi);
      return lo;
    }
    case Family::HomogeneousSU2: {
      const auto t = g.triple();
      return std::min({t[0], t[1], t[2]});
    }
  }
  return 0.0;
}

void validate_metric(const MetricField& g) {
  const auto& model = g.model();
  if (model.family == Family::PeriodicGrid) {
    const int n = g.dim();
    for (std::size_t p = 0; p < model.node_count(); ++p) {
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          if (g.g(p, i, j) != g.g(p, j, i)) throw DegenerateMetric("metric is not symmetric");
        }
      }
    }
  } else if (model.family == Family::WarpedSphere) {
    const auto warp = g.warp();
    for (std::size_t j = 1; j + 1 < warp.size(); ++j) {
      if (!(warp[j] > 0.0)) throw DegenerateMetric("warp factor must be positive off the poles");
    }
  }
  const double lo = min_metric_eigenvalue(g);
  if (!(lo > kDegenerateEigenvalue)) {
    throw DegenerateMetric("metric is degenerate (min eigenvalue " + std::to_string(lo) + ")");
  }
}

std::vector<double> warped_arclength(const MetricField& g) {
  if (g.model().family != Family::WarpedSphere) throw Unsupported("arclength: warped family only");
  const auto line = SpectralLine::get(g.model().resolution, g.model().side_length);
  return line->even_cumulative_integral(g.stretch());
}

double unit_sphere_area(int k) {
  const double half = 0.5 * (k + 1);
  return 2.0 * std::pow(std::numbers::pi, half) / std::tgamma(half);
}

}  // namespace ricci
