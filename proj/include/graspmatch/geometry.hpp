#pragma once

#include "graspmatch/rng.hpp"
#include "graspmatch/types.hpp"

#include <array>

namespace graspmatch {

// ---------------------------------------------------------------------------
// Quaternion / rigid-transform algebra
// ---------------------------------------------------------------------------

/// Homogeneous (degree-2) rotation matrix of an arbitrary quaternion. For a
/// unit quaternion this is the usual rotation matrix; for non-unit q it scales
/// by ‖q‖². This raw form is the function the rotation Jacobian differentiates,
/// so finite-difference checks of the Jacobian must perturb through it.
Mat3 rotation_matrix_homogeneous(const Vec4& q);

/// Rotation matrix of a unit quaternion (scalar-first). Requires ‖q‖ = 1
/// within 1e-6 and returns an exactly orthonormal matrix (the homogeneous
/// form divided by ‖q‖²).
Mat3 rotation_matrix(const Vec4& q);

/// The four partial derivatives ∂R/∂q_j of the homogeneous rotation matrix
/// with respect to the raw quaternion components (w, x, y, z). No unit-sphere
/// tangent projection is applied; optimizers renormalize after each update.
std::array<Mat3, 4> rotation_matrix_derivatives(const Vec4& q);

/// 3×4 Jacobian ∂(R(q)p)/∂q of the un-normalized quaternion parameterization;
/// column j is rotation_matrix_derivatives(q)[j] * p.
Mat34 rotation_jacobian(const Vec4& q, const Vec3& p);

/// q / ‖q‖.
Vec4 normalized_quaternion(const Vec4& q);

/// Hamilton product a ⊗ b (both scalar-first).
Vec4 quaternion_multiply(const Vec4& a, const Vec4& b);

/// Shortest-arc quaternion rotating unit vector `a` onto unit vector `b`.
/// For a ≈ −b an arbitrary perpendicular axis is chosen.
Vec4 shortest_arc(const Vec3& a, const Vec3& b);

/// Angle in radians between the rotations of two unit quaternions
/// (double-cover aware).
double quaternion_angle(const Vec4& q1, const Vec4& q2);

/// R(q)·p + t for every point, order preserved.
PointCloud apply_transform(const PoseParams& theta, const PointCloud& cloud);

/// Transform of a single point.
Vec3 apply_transform(const PoseParams& theta, const Vec3& p);

/// Pose such that compose(theta, inverse(theta)) is the identity.
PoseParams inverse(const PoseParams& theta);

/// Composition: apply `second` after `first` (i.e. x ↦ second(first(x))).
PoseParams compose(const PoseParams& second, const PoseParams& first);

// ---------------------------------------------------------------------------
// Cloud utilities
// ---------------------------------------------------------------------------

/// Arithmetic mean of the points. Throws on an empty cloud.
Vec3 centroid(const PointCloud& cloud);

/// Tool centre point of a preshape: centroid of its inner contact-surface
/// cloud in the gripper frame.
Vec3 tool_centre_point(const PointCloud& contact_cloud);

/// At most one representative (bin centroid) per occupied voxel. Output order
/// follows the first occurrence of each bin, which makes it deterministic.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel);

// ---------------------------------------------------------------------------
// Pose initialization sampling
// ---------------------------------------------------------------------------

/// Translations on a Fibonacci lattice projected onto the quarter sphere of
/// the given radius around `center` (upper half-space z > 0 intersected with
/// the half-space approach_half_space·x > 0, default +x). Each orientation
/// points the gripper approach axis (local −z) at `center`.
std::vector<PoseParams> fibonacci_quarter_sphere(int n, double radius, const Vec3& center);

/// The manually-added top-down poses: directly above `center` at the given
/// radius, with n distinct rolls evenly spaced about the vertical axis.
std::vector<PoseParams> top_down_ring(int n, double radius, const Vec3& center);

/// Per-axis standard deviations for Gaussian-mixture pose sampling.
struct PoseStddev {
  Vec3 t{0.0, 0.0, 0.0};
  double q = 0.0;  // per-component quaternion jitter before renormalization
};

/// n poses drawn round-robin from a Gaussian mixture centered on `means`;
/// quaternions are re-normalized after perturbation.
std::vector<PoseParams> gaussian_mixture_init(const std::vector<PoseParams>& means,
                                              const PoseStddev& stddev, int n,
                                              std::uint64_t seed);

}  // namespace graspmatch
