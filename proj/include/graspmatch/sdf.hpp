#pragma once

#include "graspmatch/types.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>

namespace graspmatch {

/// Voxel-grid signed distance field. Values are stored at lattice nodes
/// spaced `voxel` apart starting at `origin` and are trilinearly interpolated
/// between nodes. Sign convention: positive inside the gripper solid,
/// negative outside.
///
/// Construction mimics fields derived from truncated distance fusion: the
/// positive region is the solid eroded by a thin surface band, so points
/// must penetrate beyond the band before a query turns positive. That gives
/// collision queries a few millimeters of contact tolerance, which a grasp
/// in contact with the object surface requires. Exterior node values are
/// exact negative distances to the surface samples; interior node values are
/// distance-minus-band.
struct SdfGrid {
  Vec3 origin{0.0, 0.0, 0.0};
  double voxel = 0.0;
  std::array<std::int32_t, 3> dims{0, 0, 0};  // node counts per axis
  std::vector<float> values;                  // x-major: ((ix*ny)+iy)*nz+iz
  double boundary_max_abs = 0.0;              // cached for out-of-grid queries

  std::size_t node_index(int ix, int iy, int iz) const {
    return (static_cast<std::size_t>(ix) * dims[1] + iy) * dims[2] + iz;
  }
  Vec3 node_position(int ix, int iy, int iz) const {
    return origin + voxel * Vec3(ix, iy, iz);
  }
  Vec3 max_corner() const {
    return node_position(dims[0] - 1, dims[1] - 1, dims[2] - 1);
  }
};

/// Preshape fields laid out along the +x axis with non-overlapping offsets,
/// so one logical field serves several finger configurations.
struct StackedSdf {
  std::vector<SdfGrid> grids;
  double epsilon = 0.0;
  std::vector<Vec3> offsets;
};

struct SdfBuildOptions {
  double padding = -1.0;       // margin around the cloud box (m); < 0 → 4 voxels
  double surface_band = 0.003; // skin half-thickness kept non-positive (m)
};

/// Builds the signed field of a gripper preshape from its full surface cloud.
/// A node is exterior iff some grid path from the boundary reaches it without
/// ever passing much closer to the samples than the node's own distance
/// (widest-path clearance with a fixed relative slack); every other node is
/// enclosed by the sampled surface and counts as interior. Requires at least
/// 4 non-coplanar points.
SdfGrid build_sdf(const PointCloud& full_gripper_cloud, double voxel,
                  const SdfBuildOptions& options = {});

/// Trilinear interpolation inside the grid; points outside return
/// -(distance to the grid box + max boundary magnitude), guaranteed negative.
double query(const SdfGrid& sdf, const Vec3& p);

/// Assigns grid i the offset i * (max bounding diagonal + epsilon) along +x.
StackedSdf stack_preshapes(std::vector<SdfGrid> sdfs, double epsilon);

/// Query routed to one preshape of the stack: the point is shifted by that
/// preshape's offset before the grid lookup.
double query(const StackedSdf& stacked, std::size_t preshape, const Vec3& p);

/// Scene points colliding with the gripper at pose theta. The scene is
/// inverse-transformed into the gripper frame (the field itself is never
/// re-transformed), shifted by the preshape offset, and every point whose
/// query exceeds contact_tolerance is returned in its original coordinates.
std::pair<PointCloud, std::size_t> colliding_points(const StackedSdf& stacked,
                                                    std::size_t preshape,
                                                    const PointCloud& scene,
                                                    const PoseParams& theta,
                                                    double contact_tolerance = 0.0);

/// Binary serialization (little-endian; header origin/voxel/dims, payload
/// row-major 32-bit floats). Used by the CLI to cache preshape fields.
void save_sdf(const SdfGrid& sdf, std::ostream& out);
SdfGrid load_sdf(std::istream& in);

}  // namespace graspmatch
