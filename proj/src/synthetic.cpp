#include "graspmatch/synthetic.hpp"

#include "graspmatch/geometry.hpp"
#include "graspmatch/rng.hpp"

#include <cmath>

namespace graspmatch {
namespace synthetic {

PointCloud cylinder_cloud(double radius, double height, int n, std::uint64_t seed) {
  Rng rng(seed);
  const double a_side = 2.0 * M_PI * radius * height;
  const double a_cap = M_PI * radius * radius;
  const int n_side = static_cast<int>(n * a_side / (a_side + 2.0 * a_cap));
  const int n_cap = (n - n_side) / 2;
  PointCloud cloud;
  cloud.reserve(n);
  for (int i = 0; i < n_side; ++i) {
    const double th = rng.uniform(0.0, 2.0 * M_PI);
    const double z = rng.uniform(0.0, height);
    cloud.push_back(Vec3(radius * std::cos(th), radius * std::sin(th), z));
  }
  for (double zc : {0.0, height}) {
    for (int i = 0; i < n_cap; ++i) {
      const double th = rng.uniform(0.0, 2.0 * M_PI);
      const double rr = radius * std::sqrt(rng.uniform01());
      cloud.push_back(Vec3(rr * std::cos(th), rr * std::sin(th), zc));
    }
  }
  return cloud;
}

PointCloud box_surface_cloud(int n, const Vec3& half, std::uint64_t seed) {
  Rng rng(seed);
  const Vec3 areas(half[1] * half[2], half[0] * half[2], half[0] * half[1]);
  const double total = areas.sum();
  PointCloud cloud;
  cloud.reserve(n);
  for (int i = 0; i < n; ++i) {
    // Pick the fixed axis area-weighted, then the face sign uniformly.
    const double u = rng.uniform01() * total;
    const int axis = u < areas[0] ? 0 : (u < areas[0] + areas[1] ? 1 : 2);
    const double sign = rng.uniform01() < 0.5 ? -1.0 : 1.0;
    Vec3 p;
    for (int a = 0; a < 3; ++a) p[a] = rng.uniform(-half[a], half[a]);
    p[axis] = sign * half[axis];
    cloud.push_back(p);
  }
  return cloud;
}

PointCloud sphere_cloud(int n, double radius, std::uint64_t seed) {
  Rng rng(seed);
  PointCloud cloud;
  cloud.reserve(n);
  for (int i = 0; i < n; ++i) {
    Vec3 v(rng.normal(), rng.normal(), rng.normal());
    const double norm = v.norm();
    if (norm < 1e-12) {
      --i;
      continue;
    }
    cloud.push_back(radius * v / norm);
  }
  return cloud;
}

PointCloud blob_cloud(int n, double radius, std::uint64_t seed) {
  Rng rng(seed);
  PointCloud cloud;
  cloud.reserve(n);
  for (int i = 0; i < n; ++i) {
    Vec3 v(rng.normal(), rng.normal(), rng.normal());
    const double norm = v.norm();
    if (norm < 1e-12) {
      --i;
      continue;
    }
    cloud.push_back(v / norm * radius * rng.uniform(0.3, 1.0));
  }
  return cloud;
}

PointCloud table_cloud(double half_extent, double pitch, double cutout_radius) {
  PointCloud cloud;
  for (double x = -half_extent; x <= half_extent + 1e-9; x += pitch)
    for (double y = -half_extent; y <= half_extent + 1e-9; y += pitch)
      if (std::hypot(x, y) > cutout_radius) cloud.push_back(Vec3(x, y, 0.0));
  return cloud;
}

namespace {

// Gripper geometry (meters): two fingers closing along y around an opening of
// kGap, plus a palm slab behind them. Approach axis is local -z.
constexpr double kGap = 0.068;
constexpr double kFingerThickness = 0.012;
constexpr double kFingerWidth = 0.04;   // extent along x
constexpr double kFingerZMin = -0.08;   // fingertip
constexpr double kFingerZMax = 0.02;    // finger root / palm face
constexpr double kPalmZMax = 0.032;

struct Box {
  Vec3 lo, hi;
};

std::vector<Box> gripper_boxes() {
  return {
      {Vec3(-kFingerWidth / 2, kGap / 2, kFingerZMin),
       Vec3(kFingerWidth / 2, kGap / 2 + kFingerThickness, kFingerZMax)},
      {Vec3(-kFingerWidth / 2, -kGap / 2 - kFingerThickness, kFingerZMin),
       Vec3(kFingerWidth / 2, -kGap / 2, kFingerZMax)},
      {Vec3(-kFingerWidth / 2, -kGap / 2 - kFingerThickness, kFingerZMax),
       Vec3(kFingerWidth / 2, kGap / 2 + kFingerThickness, kPalmZMax)},
  };
}

// Dense sampling of all faces of a box at the given pitch.
void sample_box_surface(const Box& box, double pitch, PointCloud& out) {
  const Vec3 size = box.hi - box.lo;
  for (int axis = 0; axis < 3; ++axis) {
    const int u = (axis + 1) % 3, v = (axis + 2) % 3;
    const int nu = std::max(1, static_cast<int>(std::round(size[u] / pitch)));
    const int nv = std::max(1, static_cast<int>(std::round(size[v] / pitch)));
    for (double side : {box.lo[axis], box.hi[axis]}) {
      for (int iu = 0; iu <= nu; ++iu)
        for (int iv = 0; iv <= nv; ++iv) {
          Vec3 p;
          p[axis] = side;
          p[u] = box.lo[u] + size[u] * iu / nu;
          p[v] = box.lo[v] + size[v] * iv / nv;
          out.push_back(p);
        }
    }
  }
}

}  // namespace

TwoFingerPreshape two_finger_preshape() {
  const double pitch = 0.005;
  PointCloud inner;
  // Contact surface: the inner faces of both fingers. The palm face is part
  // of the collision body but not of the matching surface; including it drags
  // the matching optimum into palm-object interpenetration, because the palm
  // can never reach the surface its flanking points match to.
  for (double y : {kGap / 2, -kGap / 2})
    for (double x = -kFingerWidth / 2 + pitch / 2; x < kFingerWidth / 2; x += pitch)
      for (double z = kFingerZMin + pitch / 2; z < kFingerZMax; z += pitch)
        inner.push_back(Vec3(x, y, z));
  inner = voxel_downsample(inner, 0.005);

  PointCloud full;
  for (const Box& box : gripper_boxes()) sample_box_surface(box, 0.002, full);

  TwoFingerPreshape result;
  result.preshape.id = "two-finger-parallel";
  result.preshape.inner_surface_cloud = inner;
  result.preshape.full_cloud = full;
  result.preshape.tcp = tool_centre_point(inner);
  result.preshape.sdf_index = 0;
  result.closing_axis = Vec3(0.0, 1.0, 0.0);
  result.finger_gap = kGap;
  return result;
}

DeskScenario desk_scenario() {
  DeskScenario scenario;
  scenario.object = cylinder_cloud();
  scenario.gripper = two_finger_preshape();
  scenario.com = centroid(scenario.object);
  scenario.scene = scenario.object;
  const PointCloud table = table_cloud();
  scenario.scene.insert(scenario.scene.end(), table.begin(), table.end());
  return scenario;
}

GraspProblem desk_grasp_problem(std::uint64_t seed, int workers,
                                std::size_t n_initializations, std::size_t n_top_down) {
  DeskScenario scenario = desk_scenario();
  GraspProblem problem;
  problem.object_cloud = std::move(scenario.object);
  problem.scene_cloud = std::move(scenario.scene);
  problem.com = scenario.com;
  problem.preshapes = {scenario.gripper.preshape};
  problem.sdf = stack_preshapes({build_sdf(scenario.gripper.preshape.full_cloud, 0.005)}, 0.05);

  const double radius = 0.25;
  auto poses = fibonacci_quarter_sphere(
      static_cast<int>(n_initializations - n_top_down), radius, problem.com);
  const auto top = top_down_ring(static_cast<int>(n_top_down), radius, problem.com);
  poses.insert(poses.end(), top.begin(), top.end());
  problem.initializations = {poses};

  problem.k_stein = 15;
  problem.k_max = 40;
  problem.sgd.learning_rate = 1.0;
  problem.sgd.convergence_threshold = 0.0002;
  problem.stein.particle_count = poses.size();
  problem.stein.stein_iterations = problem.k_stein;
  problem.stein.annealing.period_total = problem.k_max;
  problem.seed = seed;
  problem.workers = workers;
  return problem;
}

}  // namespace synthetic
}  // namespace graspmatch
