#include "ricci/sobolev.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ricci/error.hpp"
#include "ricci/small_matrix.hpp"

namespace ricci {

namespace {

constexpr int kMinInterior = 10;

// One stiffness cell: w * sum_ab G_ab D_a u D_b u with
// D_a u = (u[plus_a] - u[self]) * inv_step_a and index -1 meaning "zero".
struct Cell {
  double weight = 0.0;
  int dirs = 0;
  int self = -1;
  int plus[kMaxDim];
  double inv_step[kMaxDim];
  double G[kMaxDim * kMaxDim];
};

struct Quotient {
  double p_star = 0.0;
  std::vector<std::size_t> nodes;  // free variable k lives on nodes[k]
  std::vector<double> mass;        // per free variable
  std::vector<Cell> cells;

  double value(const std::vector<double>& u) const { return numerator(u) / stiffness(u); }

  double numerator(const std::vector<double>& u) const {
    double m = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) m += mass[k] * std::pow(std::abs(u[k]), p_star);
    return std::pow(m, 2.0 / p_star);
  }

  double stiffness(const std::vector<double>& u) const {
    double total = 0.0;
    double du[kMaxDim];
    for (const auto& c : cells) {
      differences(c, u, du);
      double acc = 0.0;
      for (int a = 0; a < c.dirs; ++a)
        for (int b = 0; b < c.dirs; ++b) acc += c.G[a * c.dirs + b] * du[a] * du[b];
      total += c.weight * acc;
    }
    return total;
  }

  static void differences(const Cell& c, const std::vector<double>& u, double* du) {
    const double self = c.self >= 0 ? u[c.self] : 0.0;
    for (int a = 0; a < c.dirs; ++a) {
      const double plus = c.plus[a] >= 0 ? u[c.plus[a]] : 0.0;
      du[a] = (plus - self) * c.inv_step[a];
    }
  }

  // Gradient of log(numerator) - log(stiffness); returns the log-quotient.
  double log_gradient(const std::vector<double>& u, std::vector<double>& grad) const {
    const std::size_t size = u.size();
    grad.assign(size, 0.0);
    double m = 0.0;
    for (std::size_t k = 0; k < size; ++k) m += mass[k] * std::pow(u[k], p_star);
    std::vector<double> dstiff(size, 0.0);
    double stiff = 0.0;
    double du[kMaxDim], gdu[kMaxDim];
    for (const auto& c : cells) {
      differences(c, u, du);
      double acc = 0.0;
      for (int a = 0; a < c.dirs; ++a) {
        gdu[a] = 0.0;
        for (int b = 0; b < c.dirs; ++b) gdu[a] += c.G[a * c.dirs + b] * du[b];
        acc += du[a] * gdu[a];
      }
      stiff += c.weight * acc;
      for (int a = 0; a < c.dirs; ++a) {
        const double s = 2.0 * c.weight * gdu[a] * c.inv_step[a];
        if (c.plus[a] >= 0) dstiff[c.plus[a]] += s;
        if (c.self >= 0) dstiff[c.self] -= s;
      }
    }
    for (std::size_t k = 0; k < size; ++k) {
      grad[k] = 2.0 * mass[k] * std::pow(u[k], p_star - 1.0) / m - dstiff[k] / stiff;
    }
    return (2.0 / p_star) * std::log(m) - std::log(stiff);
  }
};

std::array<int, kMaxDim> minimal_offset(const ManifoldModel& model, std::size_t node,
                                        std::size_t center) {
  const auto a = model.coords(node);
  const auto b = model.coords(center);
  std::array<int, kMaxDim> o{};
  const int res = model.resolution;
  for (int k = 0; k < model.dim; ++k) {
    int d = ((a[k] - b[k]) % res + res) % res;
    if (d > res / 2) d -= res;
    o[k] = d;
  }
  return o;
}

std::vector<std::size_t> grid_order(const Ball& b, const ManifoldModel& model,
                                    const std::vector<std::size_t>& nodes) {
  std::vector<std::pair<std::array<int, kMaxDim>, std::size_t>> keyed;
  keyed.reserve(nodes.size());
  for (std::size_t p : nodes) keyed.push_back({minimal_offset(model, p, b.center), p});
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::size_t> out;
  for (const auto& [key, p] : keyed) out.push_back(p);
  return out;
}

Quotient grid_quotient(const Ball& b, const MetricField& g) {
  const auto& model = g.model();
  const int n = model.dim;
  const double h = model.spacing;
  const double cell_volume = std::pow(h, n);
  Quotient q;
  q.p_star = 2.0 * n / (n - 2);
  q.nodes = grid_order(b, model, b.members);
  std::vector<int> slot(model.node_count(), -1);
  for (std::size_t k = 0; k < q.nodes.size(); ++k) slot[q.nodes[k]] = static_cast<int>(k);

  auto volume = [&](std::size_t p) {
    return std::sqrt(to_small(g.node_matrix(p), n).determinant()) * cell_volume;
  };
  for (std::size_t p : q.nodes) q.mass.push_back(volume(p));

  // Cells: every node whose forward stencil touches the support.
  std::vector<std::size_t> support(q.nodes.begin(), q.nodes.end());
  for (std::size_t p : q.nodes) {
    for (int a = 0; a < n; ++a) support.push_back(model.shifted(p, a, -1));
  }
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());
  support = grid_order(b, model, support);

  for (std::size_t p : support) {
    Cell c;
    c.weight = volume(p);
    c.dirs = n;
    c.self = slot[p];
    const SmallMat ginv = to_small(g.node_matrix(p), n).inverse();
    for (int a = 0; a < n; ++a) {
      c.plus[a] = slot[model.shifted(p, a, 1)];
      c.inv_step[a] = 1.0 / h;
      for (int bb = 0; bb < n; ++bb) c.G[a * n + bb] = 0.5 * (ginv(a, bb) + ginv(bb, a));
    }
    q.cells.push_back(c);
  }
  return q;
}

Quotient warped_quotient(const Ball& b, const MetricField& g) {
  const auto& model = g.model();
  const int n = model.dim;
  const std::size_t nodes = model.node_count();
  const double h = model.spacing;
  if (b.center != 0 && b.center != nodes - 1) {
    throw Unsupported("sobolev: warped balls must be centered at a pole");
  }
  const bool north = b.center == 0;
  const double omega = unit_sphere_area(n - 1);
  const auto psi = g.stretch();
  const auto phi = g.warp();
  auto node_at = [&](std::size_t k) { return north ? k : nodes - 1 - k; };
  auto density = [&](double ph, double ps) { return omega * std::pow(ph, n - 1) * ps; };

  const double extent = north ? b.radial_cut : model.side_length - b.radial_cut;
  std::size_t last = 0;
  while (last + 1 < nodes && (last + 1) * h <= extent) ++last;
  double rest = extent - last * h;
  // A cut landing on a node pins that node to zero.
  std::size_t free_count = last + 1;
  if (rest < 1e-9 * h) {
    free_count = last;
    rest = 0.0;
  }

  Quotient q;
  q.p_star = 2.0 * n / (n - 2);
  for (std::size_t k = 0; k < free_count; ++k) q.nodes.push_back(node_at(k));
  for (std::size_t k = 0; k < free_count; ++k) {
    const std::size_t j = node_at(k);
    const double outer = rest > 0.0 ? rest : h;
    const double width = (k > 0 ? 0.5 * h : 0.0) + (k + 1 < free_count ? 0.5 * h : 0.5 * outer);
    q.mass.push_back(density(phi[j], psi[j]) * width);
  }
  auto segment = [&](std::size_t k, int plus, double length, double frac) {
    const std::size_t j0 = node_at(k);
    const std::size_t j1 = node_at(k + 1);
    const double ph = phi[j0] + 0.5 * frac * (phi[j1] - phi[j0]);
    const double ps = psi[j0] + 0.5 * frac * (psi[j1] - psi[j0]);
    Cell c;
    c.dirs = 1;
    c.self = static_cast<int>(k);
    c.plus[0] = plus;
    c.inv_step[0] = 1.0 / length;
    c.G[0] = 1.0 / (ps * ps);
    c.weight = density(ph, ps) * length;
    q.cells.push_back(c);
  };
  for (std::size_t k = 0; k + 1 < free_count; ++k) segment(k, static_cast<int>(k + 1), h, 1.0);
  if (rest > 0.0) {
    segment(free_count - 1, -1, rest, rest / h);
  } else if (free_count < nodes) {
    segment(free_count - 1, -1, h, 1.0);
  }
  return q;
}

Quotient build_quotient(const Ball& b, const MetricField& g) {
  switch (g.model().family) {
    case Family::PeriodicGrid: return grid_quotient(b, g);
    case Family::WarpedSphere: return warped_quotient(b, g);
    case Family::HomogeneousSU2: break;
  }
  throw Unsupported("sobolev: no node graph for the homogeneous family");
}

void normalize(std::vector<double>& u) {
  const double norm = std::sqrt(std::inner_product(u.begin(), u.end(), u.begin(), 0.0));
  if (norm > 0.0)
    for (double& x : u) x /= norm;
}

// Projected gradient ascent of log Q on {u >= 0, |u| = 1} with backtracking.
double ascend(const Quotient& q, std::vector<double>& u, const SobolevOptions& options,
              int& iterations) {
  normalize(u);
  std::vector<double> grad, trial;
  double current = q.log_gradient(u, grad);
  double step = 1.0;
  for (int it = 0; it < options.max_iterations; ++it) {
    ++iterations;
    bool improved = false;
    double next = current;
    for (int tries = 0; tries < 60; ++tries) {
      trial = u;
      for (std::size_t k = 0; k < u.size(); ++k) trial[k] = std::max(0.0, u[k] + step * grad[k]);
      normalize(trial);
      const double numer = q.numerator(trial);
      if (numer > 0.0) {
        next = std::log(numer) - std::log(q.stiffness(trial));
        if (next > current) {
          improved = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!improved) break;
    u.swap(trial);
    const double gain = std::expm1(next - current);
    current = q.log_gradient(u, grad);
    step *= 2.0;
    if (gain < options.rel_tol) break;
  }
  return std::exp(current);
}

}  // namespace

std::vector<std::size_t> canonical_members(const Ball& b, const MetricField& g) {
  return build_quotient(b, g).nodes;
}

double sobolev_quotient(const Ball& b, const MetricField& g, std::span<const double> u) {
  const auto q = build_quotient(b, g);
  if (u.size() != q.nodes.size()) throw InvalidArgument("sobolev_quotient: size mismatch");
  return q.value(std::vector<double>(u.begin(), u.end()));
}

SobolevResult estimate_sobolev(const Ball& b, const MetricField& g, const SobolevOptions& options,
                               std::span<const double> warm_start) {
  const auto q = build_quotient(b, g);
  if (static_cast<int>(q.nodes.size()) < kMinInterior) {
    throw InvalidArgument("sobolev: ball has fewer than 10 interior nodes (underresolved)");
  }
  SobolevResult best;
  best.estimate = -1.0;
  auto consider = [&](std::vector<double> u) {
    const double value = ascend(q, u, options, best.iterations);
    if (value > best.estimate) {
      best.estimate = value;
      best.optimizer = std::move(u);
    }
  };
  if (!warm_start.empty()) {
    if (warm_start.size() != q.nodes.size()) throw InvalidArgument("sobolev: warm start size");
    consider(std::vector<double>(warm_start.begin(), warm_start.end()));
    return best;
  }
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (int s = 0; s < options.starts; ++s) {
    std::vector<double> u(q.nodes.size());
    for (double& x : u) x = uniform(rng);
    consider(std::move(u));
  }
  return best;
}

double sobolev_constant(const Ball& b, const MetricField& g, const SobolevOptions& options) {
  return estimate_sobolev(b, g, options).estimate;
}

double sobolev_scaling_exponent(int n) {
  return (n - 2) / 2.0 - (n / 2.0 - 1.0);
}

}  // namespace ricci
