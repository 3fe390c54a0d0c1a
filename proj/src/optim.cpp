#include "graspmatch/optim.hpp"

#include "graspmatch/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace graspmatch {

void SgdConfig::validate() const {
  require(learning_rate > 0.0, "SgdConfig: learning_rate must be positive");
  require(A.isApprox(A.transpose(), 1e-12), "SgdConfig: A must be symmetric");
  Eigen::LLT<Mat7> llt(A);
  require(llt.info() == Eigen::Success, "SgdConfig: A must be positive definite");
}

void SteinConfig::validate() const {
  require(particle_count >= 1, "SteinConfig: particle_count must be >= 1");
  require(annealing.cycles >= 1, "SteinConfig: annealing cycles must be >= 1");
  require(annealing.exponent > 0.0, "SteinConfig: annealing exponent must be positive");
}

// ---------------------------------------------------------------------------
// ICP / SGD-ICP
// ---------------------------------------------------------------------------

namespace {

Vec4 quaternion_from_matrix(const Mat3& r) {
  // Shepperd's method: pick the largest diagonal combination for stability.
  Vec4 q;
  const double tr = r.trace();
  if (tr > 0.0) {
    double s = std::sqrt(tr + 1.0) * 2.0;
    q << 0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s, (r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2.0;
    q << (r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s;
  } else if (r(1, 1) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2.0;
    q << (r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s, (r(1, 2) + r(2, 1)) / s;
  } else {
    double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2.0;
    q << (r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, 0.25 * s;
  }
  return normalized_quaternion(q);
}

}  // namespace

ClosedFormStepResult icp_closed_form_step(const PointCloud& source, const PointCloud& reference,
                                          const PoseParams& theta, const NnIndex& index) {
  require(!source.empty() && !reference.empty(), "icp_closed_form_step: empty cloud");
  const PointCloud transformed = apply_transform(theta, source);
  Vec3 src_mean = Vec3::Zero(), ref_mean = Vec3::Zero();
  std::vector<Vec3> matches;
  matches.reserve(source.size());
  for (const Vec3& p : transformed) {
    const Vec3 match = index.nearest(p).point;
    matches.push_back(match);
    ref_mean += match;
  }
  for (const Vec3& s : source) src_mean += s;
  src_mean /= static_cast<double>(source.size());
  ref_mean /= static_cast<double>(source.size());

  Mat3 cov = Mat3::Zero();
  for (std::size_t i = 0; i < source.size(); ++i)
    cov += (source[i] - src_mean) * (matches[i] - ref_mean).transpose();

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  // A (near-)rank-deficient covariance leaves the rotation unconstrained;
  // keep the input pose and flag it instead of guessing.
  if (source.size() < 3 ||
      svd.singularValues()(1) <= 1e-12 * std::max(1.0, svd.singularValues()(0))) {
    // Translation-only alignment is still well defined.
    ClosedFormStepResult out;
    out.theta = theta;
    out.theta.t += ref_mean - (rotation_matrix(theta.q) * src_mean + theta.t);
    out.degenerate = true;
    return out;
  }
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Mat3 r = svd.matrixV() * d * svd.matrixU().transpose();
  ClosedFormStepResult out;
  out.theta.q = quaternion_from_matrix(r);
  out.theta.t = ref_mean - r * src_mean;
  return out;
}

GradientVector sgd_icp_gradients(const std::vector<MatchedPair>& pairs, const PoseParams& theta) {
  require(!pairs.empty(), "sgd_icp_gradients: need at least one pair");
  const auto dR = rotation_matrix_derivatives(theta.q);
  Vec3 g_t = Vec3::Zero();
  Vec4 g_q = Vec4::Zero();
  for (const MatchedPair& pair : pairs) {
    const Vec3 residual = pair.transformed - pair.reference;
    g_t += residual;
    for (int j = 0; j < 4; ++j) g_q[j] += residual.dot(dR[j] * pair.source);
  }
  const double m = static_cast<double>(pairs.size());
  GradientVector g;
  g << g_t / m, g_q / m;
  return g;
}

PoseParams sgd_update(const PoseParams& theta, const GradientVector& g, const SgdConfig& cfg) {
  const Vec7 step = cfg.learning_rate * (cfg.A * g);
  PoseParams out;
  out.t = theta.t - step.head<3>();
  out.q = normalized_quaternion(theta.q - step.tail<4>());
  return out;
}

// ---------------------------------------------------------------------------
// Kernels, priors, annealing
// ---------------------------------------------------------------------------

KernelValue rbf_kernel(const Vec3& t1, const Vec3& t2, double h) {
  require(h > 0.0, "rbf_kernel: bandwidth must be positive");
  const Vec3 diff = t1 - t2;
  const double value = std::exp(-diff.squaredNorm() / h);
  return KernelValue{value, (-2.0 / h) * value * diff};
}

RotationKernelValue rotation_kernel(const Vec4& q1, const Vec4& q2) {
  const double dot = q1.dot(q2);
  const double sign = dot >= 0.0 ? 1.0 : -1.0;
  return RotationKernelValue{std::abs(dot), sign * q2};
}

double median_bandwidth(const std::vector<Vec3>& translations) {
  const std::size_t k = translations.size();
  if (k < 2) return 1.0;
  std::vector<double> d2;
  d2.reserve(k * (k - 1) / 2);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j)
      d2.push_back((translations[i] - translations[j]).squaredNorm());
  std::nth_element(d2.begin(), d2.begin() + d2.size() / 2, d2.end());
  const double median = d2[d2.size() / 2];
  return std::max(median / std::log(static_cast<double>(k) + 1.0), 1e-6);
}

GradientVector prior_log_gradient(const PoseParams& theta, const PosePrior& prior) {
  GradientVector g = GradientVector::Zero();
  for (int a = 0; a < 3; ++a) {
    const double var = prior.t_sigma[a] * prior.t_sigma[a];
    require(var > 0.0, "prior_log_gradient: t_sigma must be positive");
    g[a] = -(theta.t[a] - prior.t_mean[a]) / var;
  }
  for (int j = 0; j < 4; ++j)
    g[3 + j] = -prior.q_kappa[j] * std::sin(theta.q[j] - prior.q_location[j]);
  return g;
}

double annealing(std::size_t t, std::size_t T, std::size_t C, double p) {
  require(C >= 1 && T >= C, "annealing: need T >= C >= 1");
  require(p > 0.0, "annealing: exponent must be positive");
  const double period = static_cast<double>(T) / static_cast<double>(C);
  const double phase = std::fmod(static_cast<double>(t), period) / period;
  return std::pow(phase, p);
}

double annealing(std::size_t t, const AnnealingSchedule& schedule) {
  return annealing(t, schedule.period_total, schedule.cycles, schedule.exponent);
}

// ---------------------------------------------------------------------------
// SVGD
// ---------------------------------------------------------------------------

GradientVector scaled_objective_gradient(const GradientVector& likelihood_grad,
                                         const GradientVector& prior_grad, double gamma,
                                         double n_ref) {
  return gamma * (n_ref * likelihood_grad + prior_grad);
}

std::vector<GradientVector> svgd_direction(const std::vector<PoseParams>& particles,
                                           const std::vector<GradientVector>& likelihood_grads,
                                           const std::vector<GradientVector>& prior_grads,
                                           double gamma, double n_ref, const SteinConfig& cfg) {
  const std::size_t k = particles.size();
  require(k >= 1, "svgd_direction: need at least one particle");
  require(likelihood_grads.size() == k && prior_grads.size() == k,
          "svgd_direction: mismatched gradient counts");

  std::vector<GradientVector> drifts(k);
  for (std::size_t i = 0; i < k; ++i)
    drifts[i] = scaled_objective_gradient(likelihood_grads[i], prior_grads[i], gamma, n_ref);

  double h = cfg.fixed_bandwidth;
  if (cfg.bandwidth_mode == BandwidthMode::kMedianHeuristic) {
    std::vector<Vec3> translations;
    translations.reserve(k);
    for (const PoseParams& p : particles) translations.push_back(p.t);
    h = median_bandwidth(translations);
  }

  std::vector<GradientVector> directions(k, GradientVector::Zero());
  for (std::size_t j = 0; j < k; ++j) {
    Vec3 phi_t = Vec3::Zero();
    Vec4 phi_q = Vec4::Zero();
    for (std::size_t i = 0; i < k; ++i) {
      if (i == j) {
        // Analytic self-terms: unit kernel, zero kernel gradient. Evaluating
        // them numerically would perturb the K=1 reduction by round-off.
        phi_t -= drifts[i].head<3>();
        phi_q -= drifts[i].tail<4>();
        continue;
      }
      const KernelValue kt = rbf_kernel(particles[i].t, particles[j].t, h);
      phi_t += -drifts[i].head<3>() * kt.value;
      // Repulsion on particle j from particle i: ∇_{t_i} k points toward t_j.
      phi_t += (2.0 / h) * (particles[j].t - particles[i].t) * kt.value;
      const RotationKernelValue kq = rotation_kernel(particles[i].q, particles[j].q);
      phi_q += -drifts[i].tail<4>() * kq.value;
    }
    directions[j] << phi_t, phi_q;
  }
  return directions;
}

std::vector<PoseParams> svgd_update(const std::vector<PoseParams>& particles,
                                    const std::vector<GradientVector>& directions, double eta) {
  require(particles.size() == directions.size(), "svgd_update: mismatched lengths");
  std::vector<PoseParams> out;
  out.reserve(particles.size());
  for (std::size_t i = 0; i < particles.size(); ++i) {
    PoseParams p;
    p.t = particles[i].t + eta * directions[i].head<3>();
    p.q = normalized_quaternion(particles[i].q + eta * directions[i].tail<4>());
    out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Registration driver
// ---------------------------------------------------------------------------

namespace {

// Damped inverse Gauss-Newton rotation step about the batch centroid. The
// rotation gradient is centered by the mean residual/Jacobian (the Schur
// complement of the translation block in the batch normal equations), which
// decouples it from the translation update and removes the sliding
// translation-rotation valleys a raw gradient step crawls along.
Vec4 gauss_newton_rotation_step(const std::vector<MatchedPair>& pairs, const PoseParams& theta,
                                const GradientVector& g, double damping) {
  const auto dR = rotation_matrix_derivatives(theta.q);
  const double m = static_cast<double>(pairs.size());
  Mat34 jac_mean = Mat34::Zero();
  Mat4 moment = Mat4::Zero();
  for (const MatchedPair& pair : pairs) {
    Mat34 jac;
    for (int j = 0; j < 4; ++j) jac.col(j) = dR[j] * pair.source;
    jac_mean += jac;
    moment += jac.transpose() * jac;
  }
  jac_mean /= m;
  moment /= m;
  const Mat4 centered = moment - jac_mean.transpose() * jac_mean;
  const double trace = centered.trace();
  const Vec4 g_centered = g.tail<4>() - jac_mean.transpose() * g.head<3>();
  if (!(trace > 1e-12)) return g.tail<4>();  // batch too small to shape a step
  const Mat4 damped = centered + (damping * trace / 4.0) * Mat4::Identity();
  return damped.ldlt().solve(g_centered);
}

}  // namespace

RegistrationResult register_sgd_icp(const PointCloud& source, const PointCloud& reference,
                                    const PoseParams& initial, const SgdConfig& cfg,
                                    std::uint64_t seed) {
  require(!source.empty() && !reference.empty(), "register_sgd_icp: empty cloud");
  if (cfg.preconditioner_mode == PreconditionerMode::kFixed) cfg.validate();
  const NnIndex index = build_index(reference);
  Rng rng(seed);
  const std::size_t m = std::min(cfg.minibatch_size, source.size());

  RegistrationResult result;
  result.theta = initial;
  double prev_loss = -1.0;
  std::vector<MatchedPair> pairs(m);
  for (std::size_t k = 0; k < cfg.max_iterations; ++k) {
    const auto batch = sample_minibatch_indices(source.size(), m, rng);
    const Mat3 r = rotation_matrix(result.theta.q);
    double loss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const Vec3& s = source[batch[i]];
      const Vec3 transformed = r * s + result.theta.t;
      const NearestResult match = index.nearest(transformed);
      pairs[i] = MatchedPair{s, transformed, match.point};
      loss += match.distance * match.distance;
    }
    loss /= static_cast<double>(m);

    const GradientVector g = sgd_icp_gradients(pairs, result.theta);
    if (cfg.preconditioner_mode == PreconditionerMode::kFixed) {
      result.theta = sgd_update(result.theta, g, cfg);
    } else {
      const Vec7 preconditioned_t = cfg.A * g;
      const Vec4 dq =
          gauss_newton_rotation_step(pairs, result.theta, g, cfg.gn_damping);
      result.theta.t -= cfg.learning_rate * preconditioned_t.head<3>();
      result.theta.q = normalized_quaternion(result.theta.q - cfg.learning_rate * dq);
    }
    result.iterations = k + 1;
    result.final_loss = loss;
    if (prev_loss > 0.0 && cfg.convergence_threshold >= 0.0 &&
        std::abs(loss - prev_loss) / prev_loss <= cfg.convergence_threshold && m == source.size()) {
      result.converged = true;
      break;
    }
    prev_loss = loss;
  }
  return result;
}

}  // namespace graspmatch
