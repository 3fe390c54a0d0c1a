#include "graspmatch/geometry.hpp"

#include <cmath>
#include <unordered_map>

namespace graspmatch {

Mat3 rotation_matrix_homogeneous(const Vec4& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << w * w + x * x - y * y - z * z, 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
      2.0 * (x * y + w * z), w * w - x * x + y * y - z * z, 2.0 * (y * z - w * x),
      2.0 * (x * z - w * y), 2.0 * (y * z + w * x), w * w - x * x - y * y + z * z;
  return r;
}

Mat3 rotation_matrix(const Vec4& q) {
  const double n2 = q.squaredNorm();
  require(std::abs(std::sqrt(n2) - 1.0) <= 1e-6, "rotation_matrix: quaternion is not unit-norm");
  return rotation_matrix_homogeneous(q) / n2;
}

std::array<Mat3, 4> rotation_matrix_derivatives(const Vec4& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  std::array<Mat3, 4> d;
  d[0] << w, -z, y, z, w, -x, -y, x, w;
  d[1] << x, y, z, y, -x, -w, z, w, -x;
  d[2] << -y, x, w, x, y, z, -w, z, -y;
  d[3] << -z, -w, x, w, -z, y, x, y, z;
  for (auto& m : d) m *= 2.0;
  return d;
}

Mat34 rotation_jacobian(const Vec4& q, const Vec3& p) {
  require(std::abs(q.norm() - 1.0) <= 1e-6, "rotation_jacobian: quaternion is not unit-norm");
  const auto d = rotation_matrix_derivatives(q);
  Mat34 jac;
  for (int j = 0; j < 4; ++j) jac.col(j) = d[j] * p;
  return jac;
}

Vec4 normalized_quaternion(const Vec4& q) { return q / q.norm(); }

Vec4 quaternion_multiply(const Vec4& a, const Vec4& b) {
  const double w1 = a[0], x1 = a[1], y1 = a[2], z1 = a[3];
  const double w2 = b[0], x2 = b[1], y2 = b[2], z2 = b[3];
  return Vec4(w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2, w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
              w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2, w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2);
}

Vec4 shortest_arc(const Vec3& a, const Vec3& b) {
  const Vec3 c = a.cross(b);
  const double d = a.dot(b);
  if (d < -1.0 + 1e-12) {
    Vec3 axis = a.cross(Vec3(1.0, 0.0, 0.0));
    if (axis.norm() < 1e-6) axis = a.cross(Vec3(0.0, 1.0, 0.0));
    axis.normalize();
    return Vec4(0.0, axis[0], axis[1], axis[2]);
  }
  return normalized_quaternion(Vec4(1.0 + d, c[0], c[1], c[2]));
}

double quaternion_angle(const Vec4& q1, const Vec4& q2) {
  const double d = std::min(std::abs(q1.dot(q2)), 1.0);
  return 2.0 * std::acos(d);
}

PointCloud apply_transform(const PoseParams& theta, const PointCloud& cloud) {
  const Mat3 r = rotation_matrix(theta.q);
  PointCloud out;
  out.reserve(cloud.size());
  for (const Vec3& p : cloud) out.push_back(r * p + theta.t);
  return out;
}

Vec3 apply_transform(const PoseParams& theta, const Vec3& p) {
  return rotation_matrix(theta.q) * p + theta.t;
}

PoseParams inverse(const PoseParams& theta) {
  PoseParams inv;
  inv.q = Vec4(theta.q[0], -theta.q[1], -theta.q[2], -theta.q[3]);
  inv.t = -(rotation_matrix(inv.q) * theta.t);
  return inv;
}

PoseParams compose(const PoseParams& second, const PoseParams& first) {
  PoseParams out;
  out.q = normalized_quaternion(quaternion_multiply(second.q, first.q));
  out.t = rotation_matrix(second.q) * first.t + second.t;
  return out;
}

Vec3 centroid(const PointCloud& cloud) {
  require(!cloud.empty(), "centroid: empty cloud");
  Vec3 sum = Vec3::Zero();
  for (const Vec3& p : cloud) sum += p;
  return sum / static_cast<double>(cloud.size());
}

Vec3 tool_centre_point(const PointCloud& contact_cloud) {
  require(!contact_cloud.empty(), "tool_centre_point: empty cloud");
  return centroid(contact_cloud);
}

namespace {
struct VoxelKey {
  std::int64_t x, y, z;
  bool operator==(const VoxelKey& o) const { return x == o.x && y == o.y && z == o.z; }
};
struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const {
    std::uint64_t h = 1469598103934665603ull;
    for (std::int64_t v : {k.x, k.y, k.z}) {
      h ^= static_cast<std::uint64_t>(v);
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};
}  // namespace

PointCloud voxel_downsample(const PointCloud& cloud, double voxel) {
  require(voxel > 0.0, "voxel_downsample: voxel must be positive");
  std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash> bins;
  std::vector<Vec3> sums;
  std::vector<int> counts;
  for (const Vec3& p : cloud) {
    const VoxelKey key{static_cast<std::int64_t>(std::floor(p[0] / voxel)),
                       static_cast<std::int64_t>(std::floor(p[1] / voxel)),
                       static_cast<std::int64_t>(std::floor(p[2] / voxel))};
    auto [it, inserted] = bins.try_emplace(key, sums.size());
    if (inserted) {
      sums.push_back(p);
      counts.push_back(1);
    } else {
      sums[it->second] += p;
      ++counts[it->second];
    }
  }
  PointCloud out;
  out.reserve(sums.size());
  for (std::size_t i = 0; i < sums.size(); ++i) out.push_back(sums[i] / counts[i]);
  return out;
}

std::vector<PoseParams> fibonacci_quarter_sphere(int n, double radius, const Vec3& center) {
  require(n >= 1, "fibonacci_quarter_sphere: n must be >= 1");
  require(radius > 0.0, "fibonacci_quarter_sphere: radius must be positive");
  const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
  std::vector<PoseParams> poses;
  poses.reserve(n);
  for (int i = 0; i < n; ++i) {
    // Fibonacci lattice on the upper hemisphere, with the azimuth compressed
    // into (-pi/2, pi/2) so all samples face the +x approach half-space.
    const double z = 1.0 - (i + 0.5) / n;
    const double phi = -M_PI / 2.0 + M_PI * std::fmod(i * golden, 1.0);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Vec3 dir(r * std::cos(phi), r * std::sin(phi), z);
    PoseParams pose;
    pose.t = center + radius * dir;
    pose.q = shortest_arc(Vec3(0.0, 0.0, -1.0), -dir);
    poses.push_back(pose);
  }
  return poses;
}

std::vector<PoseParams> top_down_ring(int n, double radius, const Vec3& center) {
  require(n >= 0, "top_down_ring: n must be >= 0");
  require(radius > 0.0, "top_down_ring: radius must be positive");
  std::vector<PoseParams> poses;
  poses.reserve(n);
  for (int k = 0; k < n; ++k) {
    const double a = 2.0 * M_PI * k / std::max(1, n);
    PoseParams pose;
    pose.t = center + radius * Vec3(0.0, 0.0, 1.0);
    pose.q = Vec4(std::cos(a / 2.0), 0.0, 0.0, std::sin(a / 2.0));  // roll about z
    poses.push_back(pose);
  }
  return poses;
}

std::vector<PoseParams> gaussian_mixture_init(const std::vector<PoseParams>& means,
                                              const PoseStddev& stddev, int n,
                                              std::uint64_t seed) {
  require(!means.empty(), "gaussian_mixture_init: at least one mean required");
  require(n >= 1, "gaussian_mixture_init: n must be >= 1");
  Rng rng(seed);
  std::vector<PoseParams> poses;
  poses.reserve(n);
  for (int i = 0; i < n; ++i) {
    const PoseParams& mean = means[i % means.size()];
    PoseParams pose;
    for (int a = 0; a < 3; ++a) pose.t[a] = rng.normal(mean.t[a], stddev.t[a]);
    Vec4 q = mean.q;
    for (int a = 0; a < 4; ++a) q[a] += rng.normal(0.0, stddev.q);
    pose.q = normalized_quaternion(q);
    poses.push_back(pose);
  }
  return poses;
}

}  // namespace graspmatch
