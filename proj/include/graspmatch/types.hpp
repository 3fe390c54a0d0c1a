#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace graspmatch {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec7 = Eigen::Matrix<double, 7, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat34 = Eigen::Matrix<double, 3, 4>;
using Mat7 = Eigen::Matrix<double, 7, 7>;

/// Ordered set of 3D points, coordinates in meters.
using PointCloud = std::vector<Vec3>;

/// Rigid transform parameterized as translation + scalar-first unit quaternion.
/// The 7-vector layout is (x, y, z, qw, qx, qy, qz); the quaternion is kept
/// unit-norm (within 1e-9) after every optimizer update.
struct PoseParams {
  Vec3 t{0.0, 0.0, 0.0};
  Vec4 q{1.0, 0.0, 0.0, 0.0};  // (w, x, y, z)

  static PoseParams identity() { return PoseParams{}; }

  Vec7 as_vector() const {
    Vec7 v;
    v << t, q;
    return v;
  }
  static PoseParams from_vector(const Vec7& v) {
    PoseParams p;
    p.t = v.head<3>();
    p.q = v.tail<4>();
    return p;
  }
};

/// Reference frames for the grasp objective: the tool centre point in the
/// gripper preshape frame and the object's centre of mass in the object frame.
struct GraspFrame {
  Vec3 tcp{0.0, 0.0, 0.0};
  Vec3 com{0.0, 0.0, 0.0};
};

/// One matching-step correspondence. `source` is the point in the source
/// (gripper/preshape) frame, `transformed` its image under the pose at
/// matching time, `reference` the matched reference point. Keeping all three
/// lets losses use the world-frame residual while gradients use the raw
/// source coordinates for the rotation Jacobian.
struct MatchedPair {
  Vec3 source;
  Vec3 transformed;
  Vec3 reference;
};

/// Stacked gradient (∂L/∂t, ∂L/∂q) over the 7 pose parameters.
using GradientVector = Vec7;

/// Library-wide error for contract violations on inputs.
class InvalidArgument : public std::invalid_argument {
 public:
  explicit InvalidArgument(const std::string& what) : std::invalid_argument(what) {}
};

inline void require(bool cond, const std::string& message) {
  if (!cond) throw InvalidArgument(message);
}

}  // namespace graspmatch
