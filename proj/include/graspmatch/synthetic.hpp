#pragma once

#include "graspmatch/grasp.hpp"
#include "graspmatch/types.hpp"

namespace graspmatch {
namespace synthetic {

/// Uniform area-weighted sampling of a closed cylinder standing on z = 0
/// (lateral surface plus both caps), axis through the origin.
PointCloud cylinder_cloud(double radius = 0.03, double height = 0.12, int n = 1500,
                          std::uint64_t seed = 1);

/// Uniform area-weighted sampling of an axis-aligned box surface centered at
/// the origin with the given half extents.
PointCloud box_surface_cloud(int n, const Vec3& half_extents, std::uint64_t seed);

/// Uniform sampling of a sphere surface.
PointCloud sphere_cloud(int n, double radius, std::uint64_t seed);

/// Irregular star-shaped blob (random directions, random radii up to
/// `radius`), used as a small asymmetric registration target.
PointCloud blob_cloud(int n, double radius, std::uint64_t seed);

/// Regular grid of table points on z = 0 with a circular cutout under the
/// object so the object's own footprint is not double-counted.
PointCloud table_cloud(double half_extent = 0.12, double pitch = 0.01,
                       double cutout_radius = 0.035);

/// A parallel-jaw two-finger preshape in the gripper frame: two finger slabs
/// closing along ±y plus a palm slab, approach axis −z. Returns the contact
/// preshape (inner faces of the fingers, voxel-downsampled; the palm belongs
/// only to the collision body) and the full surface cloud for the field.
struct TwoFingerPreshape {
  Preshape preshape;
  Vec3 closing_axis{0.0, 1.0, 0.0};  // gripper frame
  double finger_gap = 0.0;
};
TwoFingerPreshape two_finger_preshape();

/// The bundled desk scenario: cylinder object on a table plane with a single
/// two-finger preshape and Fibonacci quarter-sphere + top-down initializations.
struct DeskScenario {
  PointCloud object;
  PointCloud scene;
  TwoFingerPreshape gripper;
  Vec3 com{0.0, 0.0, 0.0};
};
DeskScenario desk_scenario();

/// Assembles a ready-to-run GraspProblem from the desk scenario with the
/// default hyperparameters (100 initializations, 15 Stein + 25 SGD
/// iterations, 5 mm gripper field voxel).
GraspProblem desk_grasp_problem(std::uint64_t seed, int workers = 0,
                                std::size_t n_initializations = 100,
                                std::size_t n_top_down = 6);

}  // namespace synthetic
}  // namespace graspmatch
