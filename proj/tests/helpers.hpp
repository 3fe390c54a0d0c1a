// Shared helpers for the unit test suite: deterministic random poses and the
// finite-difference gradient oracle used to validate analytic gradients.
#pragma once

#include "graspmatch/geometry.hpp"
#include "graspmatch/rng.hpp"
#include "graspmatch/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace testutil {

using graspmatch::GradientVector;
using graspmatch::PoseParams;
using graspmatch::Rng;
using graspmatch::Vec3;
using graspmatch::Vec4;
using graspmatch::Vec7;

inline Vec3 random_vec3(Rng& rng, double scale) {
  return Vec3(rng.uniform(-scale, scale), rng.uniform(-scale, scale),
              rng.uniform(-scale, scale));
}

inline Vec4 random_unit_quaternion(Rng& rng) {
  Vec4 q;
  for (int i = 0; i < 4; ++i) q[i] = rng.normal();
  if (q.norm() < 1e-12) q = Vec4(1.0, 0.0, 0.0, 0.0);
  return q / q.norm();
}

inline PoseParams random_pose(Rng& rng, double t_scale) {
  PoseParams theta;
  theta.t = random_vec3(rng, t_scale);
  theta.q = random_unit_quaternion(rng);
  return theta;
}

/// Central-difference gradient of a scalar objective over the 7 raw pose
/// parameters. The quaternion components are perturbed without
/// renormalization, which is the parameterization the analytic gradients
/// differentiate; objectives passed here must therefore evaluate rotations
/// through rotation_matrix_homogeneous.
inline GradientVector finite_difference(const std::function<double(const PoseParams&)>& f,
                                        const PoseParams& theta, double step) {
  GradientVector g;
  for (int i = 0; i < 7; ++i) {
    Vec7 v = theta.as_vector();
    v[i] += step;
    const double hi = f(PoseParams::from_vector(v));
    v[i] -= 2.0 * step;
    const double lo = f(PoseParams::from_vector(v));
    g[i] = (hi - lo) / (2.0 * step);
  }
  return g;
}

inline double relative_error(const GradientVector& fd, const GradientVector& analytic) {
  const double denom = std::max(analytic.cwiseAbs().maxCoeff(), 1e-6);
  return (fd - analytic).cwiseAbs().maxCoeff() / denom;
}

}  // namespace testutil
