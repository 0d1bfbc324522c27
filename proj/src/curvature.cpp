#include "ricci/curvature.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "ricci/error.hpp"
#include "ricci/small_matrix.hpp"
#include "ricci/spectral.hpp"

namespace ricci {

namespace {

constexpr int kN2 = kMaxDim * kMaxDim;

// Central-difference data around one grid node, dense with stride N.
template <int N>
struct NodeDerivatives {
  static constexpr int n = N;
  double g[N * N];
  double dg[N * N * N];      // dg[(a*n + i)*n + j] = d_a g_ij
  double ddg[N * N * N * N]; // ddg[((a*n + b)*n + i)*n + j] = d_a d_b g_ij
};

template <int N>
class GridStencil {
 public:
  explicit GridStencil(const MetricField& g) : g_(g), model_(g.model()) {
    strides_[0] = 1;
    for (int a = 1; a < N; ++a) strides_[a] = strides_[a - 1] * model_.resolution;
  }

  void load(std::size_t p, NodeDerivatives<N>& d) const {
    constexpr int n = N;
    constexpr int nn = n * n;
    const double h = model_.spacing;
    const double inv_2h = 0.5 / h;
    const double inv_h2 = 1.0 / (h * h);
    const double inv_4h2 = 0.25 * inv_h2;
    const auto c = model_.coords(p);
    const double* centre = block(p);
    std::copy(centre, centre + nn, d.g);

    std::size_t plus[n], minus[n];
#pragma GCC unroll 8
    for (int a = 0; a < n; ++a) {
      plus[a] = move(p, c, a, +1);
      minus[a] = move(p, c, a, -1);
      const double* __restrict gp = block(plus[a]);
      const double* __restrict gm = block(minus[a]);
      double* __restrict da = d.dg + a * nn;
      double* __restrict daa = d.ddg + (a * n + a) * nn;
      // blocks are symmetric: fill the upper triangle and mirror
#pragma GCC unroll 8
      for (int i = 0; i < n; ++i)
#pragma GCC unroll 8
        for (int j = i; j < n; ++j) {
          const int k = i * n + j;
          da[k] = da[j * n + i] = (gp[k] - gm[k]) * inv_2h;
          daa[k] = daa[j * n + i] = (gp[k] - 2.0 * centre[k] + gm[k]) * inv_h2;
        }
    }
    // plus[a] and minus[a] share every coordinate but a with p.
#pragma GCC unroll 8
    for (int a = 0; a < n; ++a) {
#pragma GCC unroll 8
      for (int b = a + 1; b < n; ++b) {
        const double* __restrict gpp = block(move(plus[a], c, b, +1));
        const double* __restrict gpm = block(move(plus[a], c, b, -1));
        const double* __restrict gmp = block(move(minus[a], c, b, +1));
        const double* __restrict gmm = block(move(minus[a], c, b, -1));
        double* __restrict dab = d.ddg + (a * n + b) * nn;
        double* __restrict dba = d.ddg + (b * n + a) * nn;
#pragma GCC unroll 8
        for (int i = 0; i < n; ++i)
#pragma GCC unroll 8
          for (int j = i; j < n; ++j) {
            const int k = i * n + j;
            const double v = (gpp[k] - gpm[k] - gmp[k] + gmm[k]) * inv_4h2;
            dab[k] = dab[j * n + i] = dba[k] = dba[j * n + i] = v;
          }
      }
    }
  }

 private:
  const double* block(std::size_t p) const { return g_.values().data() + p * N * N; }

  std::size_t move(std::size_t p, const std::array<int, kMaxDim>& c, int axis, int step) const {
    int v = c[axis] + step;
    const int res = model_.resolution;
    if (v < 0) v += res;
    if (v >= res) v -= res;
    return p + (static_cast<std::ptrdiff_t>(v) - c[axis]) * static_cast<std::ptrdiff_t>(strides_[axis]);
  }

  const MetricField& g_;
  const ManifoldModel& model_;
  std::size_t strides_[N];
};

// Cholesky factor (lower triangle) of an n x n block shifted by -shift*I.
template <int n>
bool cholesky(const double* g, double shift, double* L) {
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      double s = g[i * n + j] - (i == j ? shift : 0.0);
      for (int k = 0; k < j; ++k) s -= L[i * n + k] * L[j * n + k];
      if (i == j) {
        if (!(s > 0.0)) return false;
        L[i * n + i] = std::sqrt(s);
      } else {
        L[i * n + j] = s / L[j * n + j];
      }
    }
  return true;
}

// Inverse metric via Cholesky; returns false on a non-positive-definite block.
template <int n>
bool invert_spd(const double* g, double* out) {
  double L[n * n], Linv[n * n] = {};
  if (!cholesky<n>(g, 0.0, L)) return false;
  for (int j = 0; j < n; ++j) {
    Linv[j * n + j] = 1.0 / L[j * n + j];
    for (int i = j + 1; i < n; ++i) {
      double s = 0.0;
      for (int k = j; k < i; ++k) s -= L[i * n + k] * Linv[k * n + j];
      Linv[i * n + j] = s / L[i * n + i];
    }
  }
  // g^{-1} = L^{-T} L^{-1}
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      double s = 0.0;
      for (int k = i; k < n; ++k) s += Linv[k * n + i] * Linv[k * n + j];
      out[i * n + j] = s;
      out[j * n + i] = s;
    }
  return true;
}

// Smallest eigenvalue, computed only when g - eps*I fails a Cholesky test.
template <int n>
double min_eigenvalue(const double* g) {
  double L[n * n];
  if (cholesky<n>(g, kDegenerateEigenvalue, L)) return kDegenerateEigenvalue;
  SmallMat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = g[i * n + j];
  Eigen::SelfAdjointEigenSolver<SmallMat> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(0);
}

// Christoffel symbols of the first (gamma1[(k*n+i)*n+j] = Gamma_{k,ij}) and
// second kind (gamma2[(k*n+i)*n+j] = Gamma^k_ij).
template <int n>
void christoffel(const NodeDerivatives<n>& d, const double* ginv, double* gamma1, double* gamma2) {
  constexpr int nn = n * n;
  // both kinds are symmetric in (i, j); mirror the upper half
#pragma GCC unroll 8
  for (int k = 0; k < n; ++k)
#pragma GCC unroll 8
    for (int i = 0; i < n; ++i)
#pragma GCC unroll 8
      for (int j = i; j < n; ++j) {
        const double v =
            0.5 * (d.dg[i * nn + k * n + j] + d.dg[j * nn + k * n + i] - d.dg[k * nn + i * n + j]);
        gamma1[(k * n + i) * n + j] = v;
        gamma1[(k * n + j) * n + i] = v;
      }
#pragma GCC unroll 8
  for (int k = 0; k < n; ++k)
#pragma GCC unroll 8
    for (int i = 0; i < n; ++i)
#pragma GCC unroll 8
      for (int j = i; j < n; ++j) {
        double acc = 0.0;
#pragma GCC unroll 8
        for (int l = 0; l < n; ++l) acc += ginv[k * n + l] * gamma1[(l * n + i) * n + j];
        gamma2[(k * n + i) * n + j] = acc;
        gamma2[(k * n + j) * n + i] = acc;
      }
}

// Rm_ijkl = 1/2 (d_j d_k g_il + d_i d_l g_jk - d_j d_l g_ik - d_i d_k g_jl)
//           + Gamma^m_jk Gamma_{m,il} - Gamma^m_jl Gamma_{m,ik}
template <int n>
[[gnu::always_inline]] inline double riemann_component(const NodeDerivatives<n>& d, const double* gamma1, const double* gamma2,
                         int i, int j, int k, int l) {
  constexpr int nn = n * n;
  auto dd = [&](int a, int b, int r, int s) { return d.ddg[(a * n + b) * nn + r * n + s]; };
  double value = 0.5 * (dd(j, k, i, l) + dd(i, l, j, k) - dd(j, l, i, k) - dd(i, k, j, l));
  for (int m = 0; m < n; ++m) {
    value += gamma2[(m * n + j) * n + k] * gamma1[(m * n + i) * n + l] -
             gamma2[(m * n + j) * n + l] * gamma1[(m * n + i) * n + k];
  }
  return value;
}

// Index pairs A = (i<j) in lexicographic order.
template <int n>
struct PairTable {
  static constexpr int m = n * (n - 1) / 2;
  int first[m] = {};
  int second[m] = {};
  int pair[n][n] = {};  // pair index of {i, j}, -1 on the diagonal
  int sign[n][n] = {};  // +1 if i<j, -1 if i>j
  constexpr PairTable() {
    int A = 0;
    for (int i = 0; i < n; ++i) {
      pair[i][i] = -1;
      for (int j = i + 1; j < n; ++j) {
        first[A] = i;
        second[A] = j;
        pair[i][j] = pair[j][i] = A;
        sign[i][j] = 1;
        sign[j][i] = -1;
        ++A;
      }
    }
  }
};

// R[A*m + B] = Rm_ijkl for A = (i<j), B = (k<l).
template <int n>
void pair_block(const NodeDerivatives<n>& d, const double* gamma1, const double* gamma2,
                double* R) {
  static constexpr PairTable<n> P;
#pragma GCC unroll 16
  for (int A = 0; A < P.m; ++A)
#pragma GCC unroll 16
    for (int B = 0; B < P.m; ++B)
      R[A * P.m + B] =
          riemann_component<n>(d, gamma1, gamma2, P.first[A], P.second[A], P.first[B], P.second[B]);
}

// Ric_jl = g^{ik} Rm_ijkl from the pair block, as a flat list of signed terms.
template <int n>
struct RicciTerms {
  static constexpr int count = (n * (n + 1) / 2) * (n - 1) * (n - 1);
  int out[count] = {};   // j*n + l, j <= l
  int metric[count] = {};
  int block[count] = {};
  double sign[count] = {};
  constexpr RicciTerms() {
    constexpr PairTable<n> P;
    int t = 0;
    for (int j = 0; j < n; ++j)
      for (int l = j; l < n; ++l)
        for (int i = 0; i < n; ++i)
          for (int k = 0; k < n; ++k) {
            if (i == j || k == l) continue;
            out[t] = j * n + l;
            metric[t] = i * n + k;
            block[t] = P.pair[i][j] * P.m + P.pair[k][l];
            sign[t] = P.sign[i][j] * P.sign[k][l];
            ++t;
          }
  }
};

template <int n>
void pair_ricci(const double* R, const double* gi, double* ric) {
  static constexpr RicciTerms<n> T;
  double acc[n * n] = {};
#pragma GCC unroll 128
  for (int t = 0; t < T.count; ++t) acc[T.out[t]] += T.sign[t] * gi[T.metric[t]] * R[T.block[t]];
  for (int j = 0; j < n; ++j)
    for (int l = j; l < n; ++l) {
      ric[j * n + l] = acc[j * n + l];
      ric[l * n + j] = acc[j * n + l];
    }
}

// Full n^4 layout from the pair block; the rest follows from the two antisymmetries.
template <int n>
void expand_pairs(const double* R, double* rm) {
  static constexpr PairTable<n> P;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          const int A = P.pair[i][j], B = P.pair[k][l];
          rm[((i * n + j) * n + k) * n + l] =
              (A < 0 || B < 0) ? 0.0 : P.sign[i][j] * P.sign[k][l] * R[A * P.m + B];
        }
}

// |Rm|^2 with Rm viewed as a symmetric form on 2-vectors: for pairs A = (i<j),
// |Rm|^2 = 4 tr(R G R G) with G_{(ij)(kl)} = g^{ik} g^{jl} - g^{il} g^{jk}.
template <int n>
double norm_pairs(const double* R, const double* ginv) {
  static constexpr PairTable<n> P;
  constexpr int m = P.m;
  double G[m * m], GR[m * m];
  for (int A = 0; A < m; ++A)
    for (int B = 0; B < m; ++B) {
      const int i = P.first[A], j = P.second[A], k = P.first[B], l = P.second[B];
      G[A * m + B] = ginv[i * n + k] * ginv[j * n + l] - ginv[i * n + l] * ginv[j * n + k];
    }
  for (int A = 0; A < m; ++A)
    for (int B = 0; B < m; ++B) {
      double acc = 0.0;
      for (int C = 0; C < m; ++C) acc += G[A * m + C] * R[C * m + B];
      GR[A * m + B] = acc;
    }
  // tr(GR GR)
  double sum = 0.0;
  for (int A = 0; A < m; ++A)
    for (int B = 0; B < m; ++B) sum += GR[A * m + B] * GR[B * m + A];
  return 2.0 * std::sqrt(std::max(sum, 0.0));
}

template <int n>
double norm_rank4(const double* rm, const double* ginv) {
  static constexpr PairTable<n> P;
  double R[P.m * P.m];
  for (int A = 0; A < P.m; ++A)
    for (int B = 0; B < P.m; ++B)
      R[A * P.m + B] = rm[((P.first[A] * n + P.second[A]) * n + P.first[B]) * n + P.second[B]];
  return norm_pairs<n>(R, ginv);
}

// |T|^2 = tr((g^{-1} T)^2) for symmetric T.
template <int n>
double norm_rank2(const double* t, const double* ginv) {
  double mixed[n * n];
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += ginv[i * n + k] * t[k * n + j];
      mixed[i * n + j] = acc;
    }
  double sum = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) sum += mixed[i * n + j] * mixed[j * n + i];
  return std::sqrt(std::max(sum, 0.0));
}

// Sectional curvature K on the orthonormal pair (i, j), with its four signed slots.
void set_sectional(double* rm, int n, int i, int j, double k) {
  auto at = [&](int a, int b, int c, int d) -> double& { return rm[((a * n + b) * n + c) * n + d]; };
  at(i, j, i, j) = k;
  at(j, i, j, i) = k;
  at(i, j, j, i) = -k;
  at(j, i, i, j) = -k;
}

void allocate(CurvatureBundle& b, const ManifoldModel& model) {
  const std::size_t nodes = model.node_count();
  const std::size_t n = model.dim;
  b.model = model;
  b.dim = model.dim;
  b.metric.resize(nodes * n * n);
  b.inverse_metric.resize(nodes * n * n);
  b.riemann.resize(nodes * n * n * n * n);
  b.ricci.resize(nodes * n * n);
  b.scalar.resize(nodes);
  b.norm_rm.resize(nodes);
  b.norm_ric.resize(nodes);
}

// Fills metric/inverse (identity), Rm, Ric, R and norms of an orthonormal-frame node
// from its sectional curvatures, once `rm` has been populated.
void finish_orthonormal_node(CurvatureBundle& b, std::size_t p) {
  const int n = b.dim;
  double* g = b.metric.data() + p * n * n;
  double* gi = b.inverse_metric.data() + p * n * n;
  for (int i = 0; i < n; ++i) {
    g[i * n + i] = 1.0;
    gi[i * n + i] = 1.0;
  }
  const double* rm = b.riemann.data() + p * n * n * n * n;
  double* ric = b.ricci.data() + p * n * n;
  double r = 0.0;
  for (int j = 0; j < n; ++j)
    for (int l = 0; l < n; ++l) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += rm[((i * n + j) * n + i) * n + l];
      ric[j * n + l] = acc;
    }
  for (int j = 0; j < n; ++j) r += ric[j * n + j];
  b.scalar[p] = r;
  with_dim(n, [&]<int N>() {
    b.norm_rm[p] = norm_rank4<N>(rm, gi);
    b.norm_ric[p] = norm_rank2<N>(ric, gi);
  });
}

template <int n>
void grid_curvature_nodes(const MetricField& g, Assembly assembly, CurvatureBundle& b) {
  const std::size_t nodes = g.model().node_count();
  GridStencil<n> stencil(g);
  NodeDerivatives<n> d;
  double gamma1[n * n * n];
  for (std::size_t p = 0; p < nodes; ++p) {
    stencil.load(p, d);
    double* gi = b.inverse_metric.data() + p * n * n;
    if (!invert_spd<n>(d.g, gi) || min_eigenvalue<n>(d.g) < kDegenerateEigenvalue) {
      throw DegenerateMetric("compute_curvature: degenerate metric at node " + std::to_string(p));
    }
    std::copy(d.g, d.g + n * n, b.metric.data() + p * n * n);

    double* gamma2 = b.christoffel.data() + p * n * n * n;
    christoffel<n>(d, gi, gamma1, gamma2);

    double* rm = b.riemann.data() + p * n * n * n * n;
    double* ric = b.ricci.data() + p * n * n;
    if (assembly == Assembly::Reduced) {
      double R[n * n * n * n];
      pair_block<n>(d, gamma1, gamma2, R);
      expand_pairs<n>(R, rm);
      pair_ricci<n>(R, gi, ric);
      double r = 0.0;
      for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l) r += gi[j * n + l] * ric[j * n + l];
      b.scalar[p] = r;
      b.norm_rm[p] = norm_pairs<n>(R, gi);
      b.norm_ric[p] = norm_rank2<n>(ric, gi);
      continue;
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            rm[((i * n + j) * n + k) * n + l] = riemann_component<n>(d, gamma1, gamma2, i, j, k, l);

    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
          for (int k = 0; k < n; ++k) acc += gi[i * n + k] * rm[((i * n + j) * n + k) * n + l];
        ric[j * n + l] = acc;
      }
    double r = 0.0;
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) r += gi[j * n + l] * ric[j * n + l];
    b.scalar[p] = r;
    b.norm_rm[p] = norm_rank4<n>(rm, gi);
    b.norm_ric[p] = norm_rank2<n>(ric, gi);
  }
}

CurvatureBundle grid_curvature(const MetricField& g, Assembly assembly) {
  const auto& model = g.model();
  const int n = model.dim;
  CurvatureBundle b;
  allocate(b, model);
  b.orthonormal_frame = false;
  b.christoffel.resize(model.node_count() * n * n * n);
  with_dim(n, [&]<int N>() { grid_curvature_nodes<N>(g, assembly, b); });
  return b;
}

CurvatureBundle warped_curvature(const MetricField& g) {
  const auto& model = g.model();
  const int n = model.dim;
  const auto sec = warped_sectional(g);
  CurvatureBundle b;
  allocate(b, model);
  b.orthonormal_frame = true;
  for (std::size_t p = 0; p < model.node_count(); ++p) {
    double* rm = b.riemann.data() + p * n * n * n * n;
    for (int a = 1; a < n; ++a) {
      set_sectional(rm, n, 0, a, sec.radial[p]);
      for (int c = a + 1; c < n; ++c) set_sectional(rm, n, a, c, sec.tangential[p]);
    }
    finish_orthonormal_node(b, p);
  }
  return b;
}

CurvatureBundle su2_curvature(const MetricField& g) {
  const auto t = g.triple();
  const auto milnor = milnor_curvature(t[0], t[1], t[2]);
  CurvatureBundle b;
  allocate(b, g.model());
  b.orthonormal_frame = true;
  double* rm = b.riemann.data();
  set_sectional(rm, 3, 1, 2, milnor.sectional[0]);
  set_sectional(rm, 3, 0, 2, milnor.sectional[1]);
  set_sectional(rm, 3, 0, 1, milnor.sectional[2]);
  finish_orthonormal_node(b, 0);
  return b;
}

}  // namespace

CurvatureBundle compute_curvature(const MetricField& g, Assembly assembly) {
  switch (g.model().family) {
    case Family::PeriodicGrid: return grid_curvature(g, assembly);
    case Family::WarpedSphere:
      validate_metric(g);
      return warped_curvature(g);
    case Family::HomogeneousSU2:
      validate_metric(g);
      return su2_curvature(g);
  }
  throw Unsupported("compute_curvature: unknown family");
}

RicciField compute_ricci(const MetricField& g) {
  const auto& model = g.model();
  if (model.family != Family::PeriodicGrid) throw Unsupported("compute_ricci: grid family only");
  const int n = model.dim;
  const std::size_t nodes = model.node_count();
  RicciField out;
  out.christoffel.resize(nodes * n * n * n);
  out.inverse_metric.resize(nodes * n * n);
  out.ricci.resize(nodes * n * n);

  with_dim(n, [&]<int N>() {
    GridStencil<N> stencil(g);
    NodeDerivatives<N> d;
    double gamma1[N * N * N];
    double R[N * N * N * N];
    for (std::size_t p = 0; p < nodes; ++p) {
      stencil.load(p, d);
      double* gi = out.inverse_metric.data() + p * N * N;
      if (!invert_spd<N>(d.g, gi)) throw DegenerateMetric("compute_ricci: metric not SPD");
      double* gamma2 = out.christoffel.data() + p * N * N * N;
      christoffel<N>(d, gi, gamma1, gamma2);

      pair_block<N>(d, gamma1, gamma2, R);
      pair_ricci<N>(R, gi, out.ricci.data() + p * N * N);
    }
  });
  return out;
}

WarpedSectional warped_sectional(const MetricField& g) {
  const auto& model = g.model();
  if (model.family != Family::WarpedSphere) throw Unsupported("warped_sectional: warped only");
  const auto line = SpectralLine::get(model.resolution, model.side_length);
  const auto psi = g.stretch();
  const auto phi = g.warp();
  const auto phi_x = line->odd_derivative(phi, 1);
  const auto phi_xx = line->odd_derivative(phi, 2);
  const auto phi_xxx = line->odd_derivative(phi, 3);
  const auto psi_x = line->even_derivative(psi, 1);
  const auto psi_xx = line->even_derivative(psi, 2);

  const std::size_t nodes = model.node_count();
  WarpedSectional out;
  out.radial.resize(nodes);
  out.tangential.resize(nodes);
  for (std::size_t j = 0; j < nodes; ++j) {
    const double s = psi[j];
    const double phi_s = phi_x[j] / s;
    if (j == 0 || j + 1 == nodes) {
      // psi_x = phi_xx = 0 at a pole; phi_sss = phi_xxx/psi^3 - phi_x psi_xx/psi^4.
      const double phi_sss = phi_xxx[j] / (s * s * s) - phi_x[j] * psi_xx[j] / (s * s * s * s);
      const double k = -phi_sss / phi_s;
      out.radial[j] = k;
      out.tangential[j] = k;
    } else {
      const double phi_ss = (phi_xx[j] * s - phi_x[j] * psi_x[j]) / (s * s * s);
      out.radial[j] = -phi_ss / phi[j];
      out.tangential[j] = (1.0 - phi_s * phi_s) / (phi[j] * phi[j]);
    }
  }
  return out;
}

MilnorCurvature milnor_curvature(double a, double b, double c) {
  if (!(a > 0.0 && b > 0.0 && c > 0.0)) throw DegenerateMetric("milnor_curvature: nonpositive");
  const double root = std::sqrt(a * b * c);
  const double l1 = 2.0 * a / root;
  const double l2 = 2.0 * b / root;
  const double l3 = 2.0 * c / root;
  const double half = 0.5 * (l1 + l2 + l3);
  const double m1 = half - l1;
  const double m2 = half - l2;
  const double m3 = half - l3;
  MilnorCurvature out;
  out.ricci = {2.0 * m2 * m3, 2.0 * m1 * m3, 2.0 * m1 * m2};
  const auto& r = out.ricci;
  out.sectional = {0.5 * (r[1] + r[2] - r[0]), 0.5 * (r[0] + r[2] - r[1]),
                   0.5 * (r[0] + r[1] - r[2])};
  return out;
}

SupNorms tensor_sup_norms(const CurvatureBundle& bundle) {
  SupNorms out;
  for (double v : bundle.norm_rm) out.rm = std::max(out.rm, v);
  for (double v : bundle.norm_ric) out.ric = std::max(out.ric, v);
  return out;
}

MetricComparison metric_comparison(const MetricField& g, const MetricField& g0) {
  if (!(g.model() == g0.model())) throw InvalidArgument("metric_comparison: model mismatch");
  const auto& model = g.model();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  auto take = [&](double lambda) {
    lo = std::min(lo, lambda);
    hi = std::max(hi, lambda);
  };
  switch (model.family) {
    case Family::PeriodicGrid: {
      with_dim(model.dim, [&]<int N>() {
        using Mat = Eigen::Matrix<double, N, N, Eigen::RowMajor>;
        for (std::size_t p = 0; p < model.node_count(); ++p) {
          const Mat a = Eigen::Map<const Mat>(g.node_matrix(p).data());
          const Mat b = Eigen::Map<const Mat>(g0.node_matrix(p).data());
          Eigen::GeneralizedSelfAdjointEigenSolver<Mat> eig(a, b, Eigen::EigenvaluesOnly);
          take(eig.eigenvalues()(0));
          take(eig.eigenvalues()(N - 1));
        }
      });
      break;
    }
    case Family::WarpedSphere: {
      const auto psi = g.stretch();
      const auto psi0 = g0.stretch();
      const auto phi = g.warp();
      const auto phi0 = g0.warp();
      const auto line = SpectralLine::get(model.resolution, model.side_length);
      const auto dphi = line->odd_derivative(phi, 1);
      const auto dphi0 = line->odd_derivative(phi0, 1);
      const std::size_t nodes = model.node_count();
      for (std::size_t j = 0; j < nodes; ++j) {
        const double radial = psi[j] / psi0[j];
        take(radial * radial);
        // At a pole phi/phi0 -> phi_x/phi0_x.
        const double tangential =
            (j == 0 || j + 1 == nodes) ? dphi[j] / dphi0[j] : phi[j] / phi0[j];
        take(tangential * tangential);
      }
      break;
    }
    case Family::HomogeneousSU2: {
      const auto t = g.triple();
      const auto t0 = g0.triple();
      for (int i = 0; i < 3; ++i) take(t[i] / t0[i]);
      break;
    }
  }
  return {lo, hi, std::max(std::abs(lo - 1.0), std::abs(hi - 1.0))};
}

std::vector<double> laplacian(const CurvatureBundle& bundle, const MetricField& g,
                              std::span<const double> u) {
  const auto& model = g.model();
  const std::size_t nodes = model.node_count();
  if (u.size() != nodes) throw InvalidArgument("laplacian: field size mismatch");
  std::vector<double> out(nodes, 0.0);
  switch (model.family) {
    case Family::PeriodicGrid: {
      const int n = model.dim;
      const double h = model.spacing;
      double du[kMaxDim];
      double ddu[kN2];
      for (std::size_t p = 0; p < nodes; ++p) {
        for (int a = 0; a < n; ++a) {
          const double up = u[model.shifted(p, a, 1)];
          const double um = u[model.shifted(p, a, -1)];
          du[a] = (up - um) / (2.0 * h);
          ddu[a * n + a] = (up - 2.0 * u[p] + um) / (h * h);
          for (int b = a + 1; b < n; ++b) {
            const std::size_t pa = model.shifted(p, a, 1);
            const std::size_t ma = model.shifted(p, a, -1);
            const double v = (u[model.shifted(pa, b, 1)] - u[model.shifted(pa, b, -1)] -
                              u[model.shifted(ma, b, 1)] + u[model.shifted(ma, b, -1)]) /
                             (4.0 * h * h);
            ddu[a * n + b] = v;
            ddu[b * n + a] = v;
          }
        }
        double acc = 0.0;
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) {
            double term = ddu[a * n + b];
            for (int k = 0; k < n; ++k) term -= bundle.gamma(p, k, a, b) * du[k];
            acc += bundle.ginv(p, a, b) * term;
          }
        out[p] = acc;
      }
      break;
    }
    case Family::WarpedSphere: {
      const int n = model.dim;
      const auto line = SpectralLine::get(model.resolution, model.side_length);
      const auto psi = g.stretch();
      const auto phi = g.warp();
      const auto psi_x = line->even_derivative(psi, 1);
      const auto phi_x = line->odd_derivative(phi, 1);
      const auto u_x = line->even_derivative(u, 1);
      const auto u_xx = line->even_derivative(u, 2);
      for (std::size_t j = 0; j < nodes; ++j) {
        const double s = psi[j];
        const double u_ss = (u_xx[j] * s - u_x[j] * psi_x[j]) / (s * s * s);
        if (j == 0 || j + 1 == nodes) {
          out[j] = n * u_ss;
        } else {
          const double u_s = u_x[j] / s;
          const double phi_s = phi_x[j] / s;
          out[j] = u_ss + (n - 1) * phi_s / phi[j] * u_s;
        }
      }
      break;
    }
    case Family::HomogeneousSU2: break;
  }
  return out;
}

CurvatureDefects curvature_defects(const CurvatureBundle& b) {
  CurvatureDefects d;
  const int n = b.dim;
  auto bump = [](double& slot, double v) { slot = std::max(slot, std::abs(v)); };
  for (std::size_t p = 0; p < b.nodes(); ++p) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            const double v = b.rm(p, i, j, k, l);
            bump(d.antisymmetry, v + b.rm(p, j, i, k, l));
            bump(d.antisymmetry, v + b.rm(p, i, j, l, k));
            bump(d.pair_symmetry, v - b.rm(p, k, l, i, j));
            bump(d.bianchi, v + b.rm(p, i, k, l, j) + b.rm(p, i, l, j, k));
          }
    double scalar = 0.0;
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) {
        bump(d.ricci_symmetry, b.ric(p, j, l) - b.ric(p, l, j));
        double trace = 0.0;
        for (int i = 0; i < n; ++i)
          for (int k = 0; k < n; ++k) trace += b.ginv(p, i, k) * b.rm(p, i, j, k, l);
        bump(d.ricci_trace, b.ric(p, j, l) - trace);
        scalar += b.ginv(p, j, l) * trace;
      }
    bump(d.scalar_trace, b.scalar[p] - scalar);
    d.norm_negative = std::max({d.norm_negative, -b.norm_rm[p], -b.norm_ric[p]});
  }
  return d;
}

}  // namespace ricci
