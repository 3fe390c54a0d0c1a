#pragma once

#include "graspmatch/rng.hpp"
#include "graspmatch/spatial_index.hpp"
#include "graspmatch/types.hpp"

#include <optional>

namespace graspmatch {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// How the update preconditioner is formed.
enum class PreconditionerMode {
  /// Use the fixed matrix SgdConfig::A as-is.
  kFixed,
  /// Keep the translation block of A but rebuild the rotation block every
  /// iteration as a damped inverse Gauss-Newton matrix of the current
  /// mini-batch, with the rotation gradient centered on the batch mean
  /// (i.e. the rotation is effectively estimated about the batch centroid).
  /// This adaptive preconditioning is what lets plain first-order updates
  /// reach sub-millimeter registration accuracy.
  kGaussNewtonRotation,
};

struct SgdConfig {
  double learning_rate = 1.0;
  Mat7 A = Mat7::Identity();  // symmetric positive definite when kFixed
  std::size_t max_iterations = 500;
  /// Relative loss change below which a step counts as converged
  /// (0.02% default). Negative disables early stopping.
  double convergence_threshold = 0.0002;

  PreconditionerMode preconditioner_mode = PreconditionerMode::kFixed;
  /// Relative Levenberg damping of the Gauss-Newton rotation block.
  double gn_damping = 1e-6;
  /// Constant mini-batch size used by the registration driver.
  std::size_t minibatch_size = 100;

  void validate() const;
};

/// Gaussian prior on translation plus independent per-component von Mises
/// priors on the quaternion. The defaults (broad Gaussian, zero
/// concentration) make the prior gradient vanish, matching runs that use no
/// object knowledge.
struct PosePrior {
  Vec3 t_mean{0.0, 0.0, 0.0};
  Vec3 t_sigma{1.0, 1.0, 1.0};
  Vec4 q_location{1.0, 0.0, 0.0, 0.0};
  Vec4 q_kappa{0.0, 0.0, 0.0, 0.0};
};

enum class BandwidthMode { kMedianHeuristic, kFixed };

struct AnnealingSchedule {
  std::size_t period_total = 40;  // T: total iterations the schedule spans
  std::size_t cycles = 5;         // C: annealing cycles within T
  double exponent = 2.0;          // p: transition speed
};

struct SteinConfig {
  std::size_t particle_count = 16;
  BandwidthMode bandwidth_mode = BandwidthMode::kMedianHeuristic;
  double fixed_bandwidth = 1.0;
  PosePrior prior;  // default prior; per-particle means may override
  AnnealingSchedule annealing;
  std::size_t stein_iterations = 15;
  /// Particle step size is step_scale / N (N = reference cloud size), which
  /// cancels the N rescaling of the likelihood gradients in the attraction.
  double step_scale = 1.0;

  void validate() const;
};

// ---------------------------------------------------------------------------
// ICP / SGD-ICP
// ---------------------------------------------------------------------------

struct ClosedFormStepResult {
  PoseParams theta;
  bool degenerate = false;  // correspondence covariance was rank deficient
};

/// One matching + closed-form (Kabsch/SVD) minimization step of standard ICP.
/// Never increases the mean squared pair distance of the matching it used.
ClosedFormStepResult icp_closed_form_step(const PointCloud& source,
                                          const PointCloud& reference,
                                          const PoseParams& theta, const NnIndex& index);

/// Mean translation/rotation gradients of the matched pairs: the translation
/// part is the mean residual (identity Jacobian), the rotation part applies
/// the quaternion rotation Jacobian at each source point. These are exactly
/// the gradients of the half-mean-squared-residual objective
/// (1/2m)Σ‖R s_i + t − r̂_i‖² under frozen correspondences.
GradientVector sgd_icp_gradients(const std::vector<MatchedPair>& pairs, const PoseParams& theta);

/// θ' = θ − ηAg with the quaternion re-normalized.
PoseParams sgd_update(const PoseParams& theta, const GradientVector& g, const SgdConfig& cfg);

// ---------------------------------------------------------------------------
// Kernels, priors, annealing
// ---------------------------------------------------------------------------

struct KernelValue {
  double value;
  Vec3 gradient;  // w.r.t. the first argument
};
struct RotationKernelValue {
  double value;
  Vec4 subgradient;  // w.r.t. the first argument
};

/// exp(−‖t1−t2‖²/h) and its gradient w.r.t. t1.
KernelValue rbf_kernel(const Vec3& t1, const Vec3& t2, double h);

/// |q1·q2| and its subgradient sign(q1·q2)·q2 w.r.t. q1.
RotationKernelValue rotation_kernel(const Vec4& q1, const Vec4& q2);

/// Median of squared pairwise translation distances divided by log(K+1),
/// floored at 1e-6. Fewer than two particles fall back to h = 1.
double median_bandwidth(const std::vector<Vec3>& translations);

/// Gradient of the log prior density at θ: −(t−μ)/σ² per translation axis and
/// −κ_j·sin(q_j − loc_j) per quaternion component.
GradientVector prior_log_gradient(const PoseParams& theta, const PosePrior& prior);

/// Cyclic annealing γ = (mod(t, T/C)/(T/C))^p ∈ [0, 1).
double annealing(std::size_t t, std::size_t T, std::size_t C, double p);
double annealing(std::size_t t, const AnnealingSchedule& schedule);

// ---------------------------------------------------------------------------
// SVGD
// ---------------------------------------------------------------------------

/// The drift term shared by the Stein attraction and its single-particle SGD
/// reduction: γ(N·ḡ + ∇log p). Factoring it into one function keeps the K=1
/// Stein trajectory bit-identical to a preconditioned SGD run.
GradientVector scaled_objective_gradient(const GradientVector& likelihood_grad,
                                         const GradientVector& prior_grad, double gamma,
                                         double n_ref);

/// Blockwise Stein update directions: translations couple through the RBF
/// kernel (attraction + repulsion), rotations through the dot-product kernel
/// (attraction only; its subgradient is radial for the updated particle and
/// vanishes under renormalization, so no rotation repulsion is applied).
/// Self-terms use the analytic kernel value 1 and zero kernel gradient.
std::vector<GradientVector> svgd_direction(const std::vector<PoseParams>& particles,
                                           const std::vector<GradientVector>& likelihood_grads,
                                           const std::vector<GradientVector>& prior_grads,
                                           double gamma, double n_ref, const SteinConfig& cfg);

/// θ_j ← θ_j + η·φ_j with quaternions re-normalized.
std::vector<PoseParams> svgd_update(const std::vector<PoseParams>& particles,
                                    const std::vector<GradientVector>& directions, double eta);

// ---------------------------------------------------------------------------
// Registration driver
// ---------------------------------------------------------------------------

struct RegistrationResult {
  PoseParams theta;
  std::size_t iterations = 0;
  double final_loss = 0.0;
  bool converged = false;
};

/// Full SGD-ICP loop: per iteration, sample a constant-size mini-batch from
/// the source cloud, match it (transformed) into the reference, take one
/// preconditioned gradient step, and stop early once the relative loss change
/// falls below the convergence threshold.
RegistrationResult register_sgd_icp(const PointCloud& source, const PointCloud& reference,
                                    const PoseParams& initial, const SgdConfig& cfg,
                                    std::uint64_t seed);

}  // namespace graspmatch
