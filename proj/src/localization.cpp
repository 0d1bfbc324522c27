#include "ricci/localization.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <queue>

#include "ricci/error.hpp"
#include "ricci/small_matrix.hpp"
#include "ricci/state.hpp"

namespace ricci {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Edge lengths live on a 2^-40 lattice; path sums stay exact below 2^13.
constexpr int kLatticeBits = 40;

double quantize(double w) {
  return std::ldexp(std::nearbyint(std::ldexp(w, kLatticeBits)), -kLatticeBits);
}

std::vector<std::array<int, kMaxDim>> stencil_offsets(int n) {
  std::vector<std::array<int, kMaxDim>> out;
  int total = 1;
  for (int a = 0; a < n; ++a) total *= 3;
  for (int code = 0; code < total; ++code) {
    std::array<int, kMaxDim> o{};
    int rem = code;
    bool zero = true;
    for (int a = 0; a < n; ++a) {
      o[a] = rem % 3 - 1;
      rem /= 3;
      if (o[a] != 0) zero = false;
    }
    if (!zero) out.push_back(o);
  }
  return out;
}

// Lattice neighbours of one node: index changes for a move of -1, 0, +1 along each axis.
struct NeighbourSteps {
  std::ptrdiff_t step[kMaxDim][3];
  NeighbourSteps(const ManifoldModel& model, std::size_t p) {
    const int res = model.resolution;
    const auto c = model.coords(p);
    std::ptrdiff_t stride = 1;
    for (int a = 0; a < model.dim; ++a) {
      step[a][0] = c[a] == 0 ? (res - 1) * stride : -stride;
      step[a][1] = 0;
      step[a][2] = c[a] == res - 1 ? -(res - 1) * stride : stride;
      stride *= res;
    }
  }
  std::size_t apply(std::size_t p, const std::array<int, kMaxDim>& o, int n) const {
    std::ptrdiff_t q = static_cast<std::ptrdiff_t>(p);
    for (int a = 0; a < n; ++a) q += step[a][o[a] + 1];
    return static_cast<std::size_t>(q);
  }
};

double edge_length(const MetricField& g, std::size_t p, std::size_t q,
                   const std::array<int, kMaxDim>& o) {
  const int n = g.dim();
  const double* gp = g.node_matrix(p).data();
  const double* gq = g.node_matrix(q).data();
  double quad = 0.0;
  for (int i = 0; i < n; ++i) {
    if (o[i] == 0) continue;
    for (int j = 0; j < n; ++j) {
      if (o[j] == 0) continue;
      quad += o[i] * o[j] * (0.5 * (gp[i * n + j] + gq[i * n + j]));
    }
  }
  return quantize(g.model().spacing * std::sqrt(quad));
}

// Edge table nodes x (3^n - 1), shared by several sources on the same metric.
struct EdgeTable {
  std::vector<std::array<int, kMaxDim>> offsets;
  std::vector<std::size_t> target;
  std::vector<double> length;
};

constexpr std::size_t kMaxTableEntries = std::size_t{1} << 23;

std::optional<EdgeTable> build_edges(const MetricField& g) {
  const auto& model = g.model();
  EdgeTable t;
  t.offsets = stencil_offsets(model.dim);
  const std::size_t nodes = model.node_count();
  if (nodes * t.offsets.size() > kMaxTableEntries) return std::nullopt;
  t.target.resize(nodes * t.offsets.size());
  t.length.resize(nodes * t.offsets.size());
  for (std::size_t p = 0; p < nodes; ++p) {
    const NeighbourSteps steps(model, p);
    for (std::size_t s = 0; s < t.offsets.size(); ++s) {
      const std::size_t q = steps.apply(p, t.offsets[s], model.dim);
      t.target[p * t.offsets.size() + s] = q;
      t.length[p * t.offsets.size() + s] = edge_length(g, p, q, t.offsets[s]);
    }
  }
  return t;
}

DistanceField grid_dijkstra(const MetricField& g, std::size_t source, double cutoff,
                            const EdgeTable* table = nullptr) {
  const auto& model = g.model();
  const int n = model.dim;
  const std::size_t nodes = model.node_count();
  const auto offsets = table ? table->offsets : stencil_offsets(n);
  const std::size_t fan = offsets.size();

  DistanceField out;
  out.source = source;
  out.distance.assign(nodes, kInf);
  std::vector<char> done(nodes, 0);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  out.distance[source] = 0.0;
  heap.push({0.0, source});
  while (!heap.empty()) {
    const auto [d, p] = heap.top();
    heap.pop();
    if (done[p]) continue;
    done[p] = 1;
    auto relax = [&](std::size_t q, double w) {
      const double nd = d + w;
      if (nd <= cutoff && nd < out.distance[q]) {
        out.distance[q] = nd;
        heap.push({nd, q});
      }
    };
    if (table) {
      for (std::size_t s = 0; s < fan; ++s) {
        const std::size_t q = table->target[p * fan + s];
        if (!done[q]) relax(q, table->length[p * fan + s]);
      }
    } else {
      const NeighbourSteps steps(model, p);
      for (const auto& o : offsets) {
        const std::size_t q = steps.apply(p, o, n);
        if (!done[q]) relax(q, edge_length(g, p, q, o));
      }
    }
  }
  return out;
}

bool is_pole(const ManifoldModel& model, std::size_t node) {
  return node == 0 || node == model.node_count() - 1;
}

// Trapezoid of F over the polar ball, with the last partial segment
// integrated up to exactly the cut radius.
double polar_quadrature(const Ball& b, const ManifoldModel& model, const std::vector<double>& F) {
  const std::size_t nodes = model.node_count();
  const double h = model.spacing;
  const bool north = b.center == 0;
  // Walk outward in "distance from the pole" coordinate.
  auto at = [&](std::size_t k) { return north ? F[k] : F[nodes - 1 - k]; };
  const double extent = north ? b.radial_cut : model.side_length - b.radial_cut;
  double sum = 0.0;
  std::size_t k = 0;
  while (k + 1 < nodes && (k + 1) * h <= extent) {
    sum += 0.5 * h * (at(k) + at(k + 1));
    ++k;
  }
  const double rest = extent - k * h;
  if (rest > 0.0 && k + 1 < nodes) {
    const double frac = rest / h;
    const double f_cut = at(k) + frac * (at(k + 1) - at(k));
    sum += 0.5 * rest * (at(k) + f_cut);
  }
  return sum;
}

}  // namespace

bool Ball::contains(std::size_t node) const {
  return std::binary_search(members.begin(), members.end(), node);
}

DistanceField geodesic_distance(const MetricField& g, std::size_t source, double cutoff) {
  const auto& model = g.model();
  if (source >= model.node_count()) throw InvalidArgument("geodesic_distance: source out of range");
  switch (model.family) {
    case Family::PeriodicGrid: return grid_dijkstra(g, source, cutoff);
    case Family::WarpedSphere: {
      const auto s = warped_arclength(g);
      DistanceField out;
      out.source = source;
      out.distance.resize(s.size());
      for (std::size_t j = 0; j < s.size(); ++j) {
        const double d = std::abs(s[j] - s[source]);
        out.distance[j] = d <= cutoff ? d : kInf;
      }
      return out;
    }
    case Family::HomogeneousSU2: break;
  }
  throw Unsupported("geodesic_distance: no node graph for the homogeneous family");
}

Ball ball(const DistanceField& dist, double r, const MetricField& g) {
  if (!(r > 0.0)) throw InvalidArgument("ball: radius must be positive");
  const auto& model = g.model();
  Ball b;
  b.center = dist.source;
  b.radius = r;
  for (std::size_t p = 0; p < dist.distance.size(); ++p) {
    if (dist.distance[p] <= r) b.members.push_back(p);
  }
  if (model.family == Family::WarpedSphere) {
    if (!is_pole(model, dist.source)) {
      throw Unsupported("ball: warped balls must be centered at a pole");
    }
    const auto s = warped_arclength(g);
    const std::size_t nodes = s.size();
    const bool north = dist.source == 0;
    // Distance from the pole as a function of x, then invert at r.
    auto d_at = [&](std::size_t j) { return north ? s[j] : s[nodes - 1] - s[j]; };
    double cut_from_pole = model.side_length;
    for (std::size_t k = 0; k + 1 < nodes; ++k) {
      const std::size_t j0 = north ? k : nodes - 1 - k;
      const std::size_t j1 = north ? k + 1 : nodes - 2 - k;
      const double d0 = d_at(j0), d1 = d_at(j1);
      if (d1 >= r) {
        cut_from_pole = (k + (r - d0) / (d1 - d0)) * model.spacing;
        break;
      }
    }
    b.radial_cut = north ? cut_from_pole : model.side_length - cut_from_pole;
  }
  return b;
}

double ball_lp_norm(std::span<const double> f, double p, const Ball& b, const MetricField& g) {
  if (b.members.empty()) throw InvalidArgument("ball integral over an empty ball");
  if (!(p > 0.0)) throw InvalidArgument("ball_lp_norm: exponent must be positive");
  const auto& model = g.model();
  if (f.size() != model.node_count()) throw InvalidArgument("ball_lp_norm: field size mismatch");
  double integral = 0.0;
  switch (model.family) {
    case Family::PeriodicGrid: {
      const int n = model.dim;
      const double cell = std::pow(model.spacing, n);
      for (std::size_t node : b.members) {
        const double det = to_small(g.node_matrix(node), n).determinant();
        integral += std::pow(std::abs(f[node]), p) * std::sqrt(det) * cell;
      }
      break;
    }
    case Family::WarpedSphere: {
      const int n = model.dim;
      const double omega = unit_sphere_area(n - 1);
      const auto psi = g.stretch();
      const auto phi = g.warp();
      std::vector<double> F(model.node_count());
      for (std::size_t j = 0; j < F.size(); ++j) {
        F[j] = std::pow(std::abs(f[j]), p) * omega * std::pow(phi[j], n - 1) * psi[j];
      }
      integral = polar_quadrature(b, model, F);
      break;
    }
    case Family::HomogeneousSU2: throw Unsupported("ball integrals need a node graph");
  }
  return std::pow(integral, 1.0 / p);
}

double ball_volume(const Ball& b, const MetricField& g) {
  const std::vector<double> one(g.model().node_count(), 1.0);
  return ball_lp_norm(one, 1.0, b, g);
}

double local_energy(const CurvatureBundle& bundle, const Ball& b, const MetricField& g) {
  return ball_lp_norm(bundle.norm_rm, 0.5 * g.dim(), b, g);
}

double diameter(const MetricField& g) {
  const auto& model = g.model();
  switch (model.family) {
    case Family::PeriodicGrid: {
      const int n = model.dim;
      const auto table = build_edges(g);
      double best = 0.0;
      for (int code = 0; code < (1 << n); ++code) {
        std::array<int, kMaxDim> c{};
        for (int a = 0; a < n; ++a) c[a] = (code >> a & 1) ? model.resolution / 2 : 0;
        const auto d = grid_dijkstra(g, model.index(std::span<const int>(c.data(), n)), kInf,
                                     table ? &*table : nullptr);
        best = std::max(best, *std::max_element(d.distance.begin(), d.distance.end()));
      }
      return best;
    }
    case Family::WarpedSphere: return warped_arclength(g).back();
    case Family::HomogeneousSU2: break;
  }
  throw Unsupported("diameter: no node graph for the homogeneous family");
}

GraphDistances::GraphDistances(MetricField g) : g_(std::move(g)) {}

const DistanceField& GraphDistances::from(std::size_t source) {
  auto it = cache_.find(source);
  if (it == cache_.end()) it = cache_.emplace(source, geodesic_distance(g_, source)).first;
  return it->second;
}

std::size_t GraphDistances::node_count() const { return g_.model().node_count(); }

double GraphDistances::spacing() const {
  const auto& model = g_.model();
  if (model.family != Family::PeriodicGrid) return 0.0;
  // shortest axis edge over all nodes
  double h = std::numeric_limits<double>::infinity();
  const int n = model.dim;
  for (std::size_t p = 0; p < model.node_count(); ++p) {
    for (int a = 0; a < n; ++a) h = std::min(h, model.spacing * std::sqrt(g_.g(p, a, a)));
  }
  return h;
}

BallCover gromov_cover(DistanceProvider& distances, std::size_t x, double r) {
  if (!(r > 0.0)) throw InvalidArgument("gromov_cover: radius must be positive");
  if (!(r > 2.0 * distances.spacing())) {
    throw InvalidArgument("gromov_cover: radius must exceed two lattice spacings");
  }
  const std::size_t nodes = distances.node_count();
  // Copy: the provider may rehash while we query other sources.
  const std::vector<double> dx = distances.from(x).distance;

  BallCover cover;
  cover.center = x;
  cover.radius = r;
  std::vector<std::size_t> order(nodes);
  for (std::size_t p = 0; p < nodes; ++p) order[p] = p;
  const ManifoldModel* model = distances.model();
  if (model && model->family == Family::PeriodicGrid) {
    const int n = model->dim;
    const int res = model->resolution;
    const auto origin = model->coords(x);
    auto key = [&](std::size_t p) {
      const auto c = model->coords(p);
      std::array<int, kMaxDim> k{};
      for (int a = 0; a < n; ++a) {
        int d = ((c[a] - origin[a]) % res + res) % res;
        if (d > res / 2) d -= res;
        k[n - 1 - a] = d;
      }
      return k;
    };
    std::vector<std::array<int, kMaxDim>> keys(nodes);
    for (std::size_t p = 0; p < nodes; ++p) keys[p] = key(p);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  }
  std::vector<std::size_t> inner;
  for (std::size_t p : order) {
    if (dx[p] <= 2.0 * r) cover.target.push_back(p);
    if (dx[p] <= 1.5 * r) inner.push_back(p);
  }
  std::vector<char> covered(nodes, 0);
  auto add_center = [&](std::size_t y) {
    cover.centers.push_back(y);
    const auto& dy = distances.from(y).distance;
    for (std::size_t p : cover.target) {
      if (dy[p] <= r) covered[p] = 1;
    }
  };

  for (std::size_t z : inner) {
    if (!covered[z]) add_center(z);
  }
  for (std::size_t z : cover.target) {
    if (covered[z]) continue;
    const auto& dz = distances.from(z).distance;
    std::size_t best = inner.front();
    for (std::size_t y : inner) {
      if (dz[y] < dz[best]) best = y;
    }
    if (!(dz[best] <= r)) throw Error("gromov_cover: shell node farther than r from B_{3r/2}");
    add_center(best);
    if (!covered[z]) throw Error("gromov_cover: covering step failed");
  }

  cover.count = cover.centers.size();
  for (std::size_t p : cover.target) {
    int m = 0;
    for (std::size_t y : cover.centers) {
      if (distances.from(y).distance[p] <= r) ++m;
    }
    cover.multiplicity = std::max(cover.multiplicity, m);
  }
  return cover;
}

std::size_t cover_violations(DistanceProvider& distances, const BallCover& cover) {
  std::size_t bad = 0;
  const std::vector<double> dx = distances.from(cover.center).distance;
  for (std::size_t y : cover.centers) {
    if (!(dx[y] <= 1.5 * cover.radius)) ++bad;
  }
  // The target is recomputed from scratch rather than trusted.
  for (std::size_t p = 0; p < dx.size(); ++p) {
    if (!(dx[p] <= 2.0 * cover.radius)) continue;
    bool hit = false;
    for (std::size_t y : cover.centers) {
      if (distances.from(y).distance[p] <= cover.radius) {
        hit = true;
        break;
      }
    }
    if (!hit) ++bad;
  }
  return bad;
}

EnergyTracker::EnergyTracker(const MetricField& g0, double r, bool dense)
    : g0_(g0), radius_(0.5 * r), dense_(dense) {
  if (!(r > 0.0)) throw InvalidArgument("EnergyTracker: radius must be positive");
  const auto& model = g0.model();
  switch (model.family) {
    case Family::PeriodicGrid: {
      const int n = model.dim;
      if (dense) {
        for (std::size_t p = 0; p < model.node_count(); ++p) centers_.push_back(p);
        break;
      }
      int total = 1;
      for (int a = 0; a < n; ++a) total *= 3;
      for (int code = 0; code < total; ++code) {
        std::array<int, kMaxDim> c{};
        int rem = code;
        for (int a = 0; a < n; ++a) {
          c[a] = (rem % 3) * model.resolution / 3;
          rem /= 3;
        }
        centers_.push_back(model.index(std::span<const int>(c.data(), n)));
      }
      break;
    }
    case Family::WarpedSphere:
      centers_ = {0, model.node_count() - 1};
      break;
    case Family::HomogeneousSU2: throw Unsupported("EnergyTracker: no node graph");
  }
}

const Ball& EnergyTracker::ball_at(std::size_t node) {
  auto it = balls_.find(node);
  if (it == balls_.end()) {
    const auto d = geodesic_distance(g0_, node, radius_);
    it = balls_.emplace(node, ball(d, radius_, g0_)).first;
  }
  return it->second;
}

double EnergyTracker::measure(const CurvatureBundle& bundle, const MetricField& g) {
  double best = 0.0;
  for (std::size_t c : centers_) best = std::max(best, local_energy(bundle, ball_at(c), g));
  if (!dense_ && g.model().family == Family::PeriodicGrid) {
    const auto peak = std::max_element(bundle.norm_rm.begin(), bundle.norm_rm.end());
    const auto node = static_cast<std::size_t>(peak - bundle.norm_rm.begin());
    best = std::max(best, local_energy(bundle, ball_at(node), g));
  }
  return best;
}

double EnergyTracker::update(double t, const CurvatureBundle& bundle, const MetricField& g) {
  const double now = measure(bundle, g);
  e0_ = std::max(e0_, now);
  times_.push_back(t);
  instant_.push_back(now);
  history_.push_back(e0_);
  return e0_;
}

EnergyTracker track_e0(EnergyTracker tracker, const FlowState& state) {
  tracker.update(state.t, state.curvature, state.metric);
  return tracker;
}

}  // namespace ricci
