#pragma once

#include "ricci/curvature.hpp"
#include "ricci/manifold.hpp"

namespace ricci {

/// A metric at time t together with its cached curvature.
struct FlowState {
  double t = 0.0;
  MetricField metric;
  CurvatureBundle curvature;
};

FlowState make_state(MetricField g, double t = 0.0);

}  // namespace ricci
