#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>

#include "ricci/error.hpp"

#include "ricci/manifold.hpp"

namespace ricci {

/// Stack-allocated dynamic-size matrix for per-node tensors (n <= kMaxDim).
using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

inline SmallMat to_small(std::span<const double> block, int n) {
  SmallMat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = block[i * n + j];
  return m;
}

/// Calls f.template operator()<N>() with N = n, for 3 <= n <= kMaxDim.
template <class F>
decltype(auto) with_dim(int n, F&& f) {
  switch (n) {
    case 3: return f.template operator()<3>();
    case 4: return f.template operator()<4>();
    case 5: return f.template operator()<5>();
    case 6: return f.template operator()<6>();
  }
  throw Unsupported("dimension " + std::to_string(n) + " not in [3, 6]");
}

}  // namespace ricci
