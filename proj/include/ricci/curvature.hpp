#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ricci/manifold.hpp"

namespace ricci {

/// Pointwise curvature of a MetricField.
///
/// PeriodicGrid tensors are in coordinate components, with `metric` the
/// coordinate metric. WarpedSphere and HomogeneousSU2 tensors are given in
/// an orthonormal frame (index 0 radial for the warped family, Milnor frame
/// for SU(2)), so `metric` is the identity there and `christoffel` is empty.
///
/// Sign convention: Rm_ijij is the sectional curvature of an orthonormal pair,
/// Ric_jl = g^{ik} Rm_ijkl and R = g^{jl} Ric_jl (unit sphere: Ric = (n-1) g).
struct CurvatureBundle {
  ManifoldModel model;
  int dim = 0;
  bool orthonormal_frame = false;
  std::vector<double> metric;          // nodes * n^2
  std::vector<double> inverse_metric;  // nodes * n^2
  std::vector<double> christoffel;     // nodes * n^3, Gamma^k_ij at ((p*n + k)*n + i)*n + j
  std::vector<double> riemann;         // nodes * n^4
  std::vector<double> ricci;           // nodes * n^2
  std::vector<double> scalar;
  std::vector<double> norm_rm;
  std::vector<double> norm_ric;

  std::size_t nodes() const { return scalar.size(); }
  double rm(std::size_t p, int i, int j, int k, int l) const {
    const std::size_t n = dim;
    return riemann[(((p * n + i) * n + j) * n + k) * n + l];
  }
  double ric(std::size_t p, int i, int j) const { return ricci[(p * dim + i) * dim + j]; }
  double ginv(std::size_t p, int i, int j) const {
    return inverse_metric[(p * dim + i) * dim + j];
  }
  double gamma(std::size_t p, int k, int i, int j) const {
    const std::size_t n = dim;
    return christoffel[((p * n + k) * n + i) * n + j];
  }
};

/// Full: every Rm_ijkl is assembled from the stencil independently, so the
/// algebraic symmetries are a genuine check. Reduced: only i<j, k<l are
/// assembled and the rest is filled by antisymmetry (used by the integrator).
enum class Assembly { Full, Reduced };

/// Curvature bundle. Throws DegenerateMetric if some node has min eigenvalue
/// below kDegenerateEigenvalue.
CurvatureBundle compute_curvature(const MetricField& g, Assembly assembly = Assembly::Full);

/// Christoffel symbols, inverse metric and Ricci tensor of a grid metric,
/// without assembling the full Riemann tensor. Used by the integrator.
struct RicciField {
  std::vector<double> christoffel;
  std::vector<double> inverse_metric;
  std::vector<double> ricci;
};
RicciField compute_ricci(const MetricField& g);

/// Sectional curvatures of a warped metric: radial planes k_r = -phi_ss/phi,
/// tangential planes k_t = (1 - phi_s^2)/phi^2, with the L'Hopital limit
/// k_r = k_t = -phi_sss/phi_s at the poles (s = arc length).
struct WarpedSectional {
  std::vector<double> radial;
  std::vector<double> tangential;
};
WarpedSectional warped_sectional(const MetricField& g);

/// Principal Ricci curvatures and sectional curvatures of diag(a, b, c) in the
/// Milnor frame of SU(2), where [X_i, X_{i+1}] = 2 X_{i+2}.
struct MilnorCurvature {
  std::array<double, 3> ricci;      // r_1, r_2, r_3 on the orthonormal frame
  std::array<double, 3> sectional;  // K_23, K_13, K_12
};
MilnorCurvature milnor_curvature(double a, double b, double c);

struct SupNorms {
  double rm = 0.0;
  double ric = 0.0;
};
SupNorms tensor_sup_norms(const CurvatureBundle& bundle);

/// Extreme generalized eigenvalues of g relative to g0 over all nodes, and
/// dev = sup over nodes of the g0-operator norm of g0^{-1}(g - g0), i.e. max |lambda - 1|.
struct MetricComparison {
  double lambda_min = 1.0;
  double lambda_max = 1.0;
  double dev = 0.0;
};
MetricComparison metric_comparison(const MetricField& g, const MetricField& g0);

/// Laplace-Beltrami of a scalar sampled on the nodes (radial scalars for the
/// warped family; identically zero for the homogeneous family).
std::vector<double> laplacian(const CurvatureBundle& bundle, const MetricField& g,
                              std::span<const double> u);

/// Largest violations of the algebraic identities of a curvature bundle.
struct CurvatureDefects {
  double antisymmetry = 0.0;     // Rm_ijkl + Rm_jikl, Rm_ijkl + Rm_ijlk
  double pair_symmetry = 0.0;    // Rm_ijkl - Rm_klij
  double bianchi = 0.0;          // Rm_ijkl + Rm_iklj + Rm_iljk
  double ricci_symmetry = 0.0;   // Ric_ij - Ric_ji
  double ricci_trace = 0.0;      // Ric_jl - g^{ik} Rm_ijkl
  double scalar_trace = 0.0;     // R - g^{ik} g^{jl} Rm_ijkl
  double norm_negative = 0.0;    // max(0, -|Rm|, -|Ric|)
};
CurvatureDefects curvature_defects(const CurvatureBundle& bundle);

}  // namespace ricci
