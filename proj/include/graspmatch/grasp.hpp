#pragma once

#include "graspmatch/optim.hpp"
#include "graspmatch/sdf.hpp"
#include "graspmatch/spatial_index.hpp"
#include "graspmatch/types.hpp"

#include <optional>
#include <string>

namespace graspmatch {

/// A fixed finger configuration of the gripper: the inner contact-surface
/// cloud drives the matching objective, the full cloud defines the collision
/// field, and the TCP is the contact cloud's centroid in the gripper frame.
struct Preshape {
  std::string id;
  PointCloud inner_surface_cloud;  // S, gripper frame
  PointCloud full_cloud;           // G, gripper frame
  Vec3 tcp{0.0, 0.0, 0.0};
  std::size_t sdf_index = 0;

  void validate() const;
};

/// Everything a grasp synthesis run needs.
struct GraspProblem {
  PointCloud object_cloud;                       // R
  PointCloud scene_cloud;                        // C = object + table
  std::vector<Preshape> preshapes;
  StackedSdf sdf;
  Vec3 com{0.0, 0.0, 0.0};
  std::vector<std::vector<PoseParams>> initializations;  // per preshape
  SgdConfig sgd;
  SteinConfig stein;
  std::size_t k_stein = 15;
  std::size_t k_max = 40;
  double contact_tolerance = 0.0;
  std::uint64_t seed = 0;
  int workers = 0;      // 0 = hardware concurrency
  bool record_trace = false;

  void validate() const;
};

enum class ParticlePhase { kStein, kSgd };

struct ParticleState {
  PoseParams theta;
  std::size_t preshape_id = 0;
  double loss = 0.0;
  bool in_collision = false;
  bool converged = false;
  ParticlePhase phase = ParticlePhase::kStein;
};

struct TraceRecord {
  std::size_t iteration = 0;
  std::size_t particle = 0;
  std::size_t preshape_id = 0;
  double loss = 0.0;
  bool in_collision = false;
  ParticlePhase phase = ParticlePhase::kStein;
  PoseParams theta;
};

struct ParticleSummary {
  std::size_t particle = 0;
  std::size_t preshape_id = 0;
  PoseParams theta;
  double full_cloud_loss = 0.0;  // evaluated on the full reference cloud
  bool collision_free = false;
  bool converged = false;
};

enum class GraspStatus { kFound, kNoGraspFound };

struct GraspSolution {
  GraspStatus status = GraspStatus::kNoGraspFound;
  PoseParams theta;
  std::size_t preshape_id = 0;
  double final_loss = 0.0;
  bool converged = false;  // convergence flag of the selected particle
  std::vector<ParticleSummary> particles;
  std::vector<TraceRecord> trace;
};

// ---------------------------------------------------------------------------
// Losses and gradients
// ---------------------------------------------------------------------------

/// Mean squared pair distance over the m matched pairs.
double contact_loss(const std::vector<MatchedPair>& pairs, std::size_t m);

/// ‖R·tcp + t − com‖².
double com_loss(const PoseParams& theta, const Vec3& tcp, const Vec3& com);

/// Unit-weight sum of the two grasp quality terms.
double total_loss(double contact, double com);

/// Combined contact + centre-of-mass gradients. Translation part:
/// (Σ residuals + com residual)/m. Rotation part applies the rotation
/// Jacobian at each source point and at the TCP, with the same 1/m scale.
/// Equivalently, the exact gradient of
///   (1/2m)(Σ‖R s_i + t − r̂_i‖² + ‖R·tcp + t − com‖²)
/// under frozen correspondences.
GradientVector grasp_gradients(const std::vector<MatchedPair>& pairs, const PoseParams& theta,
                               const Vec3& tcp, const Vec3& com, std::size_t m);

/// Collision escape objective: each colliding scene point is matched to its
/// nearest point on the transformed contact surface (the reverse of the
/// contact matching direction), and the gradients pull the contact surface
/// onto those points, which drags the gripper body off the object. The
/// centre-of-mass term is excluded. Returns (mean squared distance, gradients).
std::pair<double, GradientVector> collision_loss_and_gradients(const PointCloud& colliding,
                                                               const PointCloud& gripper_surface,
                                                               const PointCloud& surface_local,
                                                               const PoseParams& theta);

/// Relative-change convergence test, gated on being collision free.
bool convergence_check(double loss_k, double loss_prev, double threshold, bool in_collision);

/// Matches every transformed contact-surface point to its nearest neighbor
/// in the given reference pool (the mini-batch of the reference cloud).
std::vector<MatchedPair> match_surface_to_pool(const PointCloud& surface_local,
                                               const PointCloud& surface_world,
                                               const PointCloud& pool);

// ---------------------------------------------------------------------------
// Orchestrator
// ---------------------------------------------------------------------------

/// Two-phase annealed-particle grasp optimization:
/// per iteration and particle, transform the contact surface, sample a
/// reference mini-batch, compute grasp gradients, and substitute collision
/// gradients whenever the scene intersects the gripper field; particles move
/// by coupled Stein updates for k < k_stein and independent SGD updates
/// afterwards. A colliding particle is never considered converged; converged
/// particles freeze. The final pose is the loss-argmin over collision-free
/// particles, with losses recomputed on the full reference cloud.
GraspSolution optimize_grasp(const GraspProblem& problem);

/// Table-style particle allocation: floor((n_total - n_top)/n_groups) + n_top
/// particles per preshape.
std::size_t particles_per_preshape(std::size_t n_total, std::size_t n_top, std::size_t n_groups);

}  // namespace graspmatch
