#include "graspmatch/grasp.hpp"

#include "graspmatch/geometry.hpp"
#include "graspmatch/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

namespace graspmatch {

void Preshape::validate() const {
  require(!inner_surface_cloud.empty(), "Preshape: empty inner surface cloud");
  require(!full_cloud.empty(), "Preshape: empty full cloud");
  require((tcp - tool_centre_point(inner_surface_cloud)).norm() <= 1e-9,
          "Preshape: tcp must be the contact-surface centroid");
}

void GraspProblem::validate() const {
  require(!object_cloud.empty(), "GraspProblem: empty object cloud");
  require(!scene_cloud.empty(), "GraspProblem: empty scene cloud");
  require(!preshapes.empty(), "GraspProblem: no preshapes");
  require(initializations.size() == preshapes.size(),
          "GraspProblem: one initialization list per preshape required");
  require(k_stein <= k_max, "GraspProblem: k_stein must not exceed k_max");
  for (const Preshape& p : preshapes) {
    p.validate();
    require(p.sdf_index < sdf.grids.size(), "GraspProblem: preshape sdf_index out of range");
  }
}

// ---------------------------------------------------------------------------
// Losses and gradients
// ---------------------------------------------------------------------------

double contact_loss(const std::vector<MatchedPair>& pairs, std::size_t m) {
  require(m >= 1, "contact_loss: m must be >= 1");
  double sum = 0.0;
  for (const MatchedPair& pair : pairs) sum += (pair.transformed - pair.reference).squaredNorm();
  return sum / static_cast<double>(m);
}

double com_loss(const PoseParams& theta, const Vec3& tcp, const Vec3& com) {
  return (rotation_matrix(theta.q) * tcp + theta.t - com).squaredNorm();
}

double total_loss(double contact, double com) { return contact + com; }

GradientVector grasp_gradients(const std::vector<MatchedPair>& pairs, const PoseParams& theta,
                               const Vec3& tcp, const Vec3& com, std::size_t m) {
  require(m >= 1, "grasp_gradients: m must be >= 1");
  const auto dR = rotation_matrix_derivatives(theta.q);
  const Vec3 com_residual = rotation_matrix(theta.q) * tcp + theta.t - com;
  Vec3 g_t = com_residual;
  Vec4 g_q;
  for (int j = 0; j < 4; ++j) g_q[j] = com_residual.dot(dR[j] * tcp);
  for (const MatchedPair& pair : pairs) {
    const Vec3 residual = pair.transformed - pair.reference;
    g_t += residual;
    for (int j = 0; j < 4; ++j) g_q[j] += residual.dot(dR[j] * pair.source);
  }
  GradientVector g;
  g << g_t / static_cast<double>(m), g_q / static_cast<double>(m);
  return g;
}

std::pair<double, GradientVector> collision_loss_and_gradients(const PointCloud& colliding,
                                                               const PointCloud& gripper_surface,
                                                               const PointCloud& surface_local,
                                                               const PoseParams& theta) {
  require(!colliding.empty(), "collision_loss_and_gradients: no colliding points");
  require(gripper_surface.size() == surface_local.size(),
          "collision_loss_and_gradients: surface clouds must correspond");
  const NnIndex surface_index = build_index(gripper_surface);
  std::vector<MatchedPair> pairs;
  pairs.reserve(colliding.size());
  for (const Vec3& r_col : colliding) {
    const NearestResult nearest = surface_index.nearest(r_col);
    pairs.push_back(MatchedPair{surface_local[nearest.index], nearest.point, r_col});
  }
  const double loss = contact_loss(pairs, pairs.size());
  return {loss, sgd_icp_gradients(pairs, theta)};
}

bool convergence_check(double loss_k, double loss_prev, double threshold, bool in_collision) {
  require(loss_prev > 0.0, "convergence_check: previous loss must be positive");
  if (in_collision) return false;
  return std::abs(loss_k - loss_prev) / loss_prev <= threshold;
}

std::vector<MatchedPair> match_surface_to_pool(const PointCloud& surface_local,
                                               const PointCloud& surface_world,
                                               const PointCloud& pool) {
  require(surface_local.size() == surface_world.size(),
          "match_surface_to_pool: surface clouds must correspond");
  require(!pool.empty(), "match_surface_to_pool: empty pool");
  const NnIndex pool_index = build_index(pool);
  std::vector<MatchedPair> pairs;
  pairs.reserve(surface_local.size());
  for (std::size_t i = 0; i < surface_local.size(); ++i) {
    const NearestResult nearest = pool_index.nearest(surface_world[i]);
    pairs.push_back(MatchedPair{surface_local[i], surface_world[i], nearest.point});
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Orchestrator
// ---------------------------------------------------------------------------

std::size_t particles_per_preshape(std::size_t n_total, std::size_t n_top, std::size_t n_groups) {
  require(n_groups >= 1, "particles_per_preshape: n_groups must be >= 1");
  require(n_total >= n_top, "particles_per_preshape: n_total must cover the top-down poses");
  return (n_total - n_top) / n_groups + n_top;
}

namespace {

struct Particle {
  PoseParams theta;
  std::size_t preshape = 0;
  std::size_t index_in_preshape = 0;
  double loss = std::numeric_limits<double>::quiet_NaN();
  double prev_loss = std::numeric_limits<double>::quiet_NaN();
  bool in_collision = false;
  bool converged = false;
};

}  // namespace

GraspSolution optimize_grasp(const GraspProblem& problem) {
  problem.validate();

  std::vector<Particle> particles;
  for (std::size_t ps = 0; ps < problem.preshapes.size(); ++ps)
    for (std::size_t j = 0; j < problem.initializations[ps].size(); ++j) {
      Particle p;
      p.theta = problem.initializations[ps][j];
      p.preshape = ps;
      p.index_in_preshape = j;
      particles.push_back(p);
    }
  const std::size_t n_particles = particles.size();
  require(n_particles >= 1, "optimize_grasp: no initial poses");

  // One stream per particle, seeded from the base seed and the particle id,
  // so results do not depend on the worker count.
  std::vector<Rng> streams;
  streams.reserve(n_particles);
  for (std::size_t j = 0; j < n_particles; ++j) streams.emplace_back(problem.seed + j);

  const std::size_t n_ref = problem.object_cloud.size();
  const double eta_stein = problem.stein.step_scale / static_cast<double>(n_ref);

  GraspSolution solution;
  std::vector<GradientVector> grads(n_particles, GradientVector::Zero());
  std::vector<GradientVector> prior_grads(n_particles, GradientVector::Zero());
  std::mutex trace_mutex;

  for (std::size_t k = 0; k < problem.k_max; ++k) {
    const bool stein_phase = k < problem.k_stein;
    const std::size_t m = minibatch_schedule(k, problem.k_max, n_ref);

    parallel_for(n_particles, problem.workers, [&](std::size_t j) {
      Particle& particle = particles[j];
      // Converged particles are frozen for the rest of the SGD phase.
      if (!stein_phase && particle.converged) return;
      const Preshape& preshape = problem.preshapes[particle.preshape];

      const auto [colliding, n_col] =
          colliding_points(problem.sdf, preshape.sdf_index, problem.scene_cloud, particle.theta,
                           problem.contact_tolerance);
      const PointCloud surface_world = apply_transform(particle.theta, preshape.inner_surface_cloud);

      double loss;
      GradientVector g;
      if (n_col > 0) {
        // Constraint violated: the collision objective replaces the grasp one.
        std::tie(loss, g) = collision_loss_and_gradients(colliding, surface_world,
                                                         preshape.inner_surface_cloud,
                                                         particle.theta);
      } else {
        const PointCloud pool = sample_minibatch(problem.object_cloud, m, streams[j]);
        const auto pairs =
            match_surface_to_pool(preshape.inner_surface_cloud, surface_world, pool);
        g = grasp_gradients(pairs, particle.theta, preshape.tcp, problem.com, pairs.size());
        loss = total_loss(contact_loss(pairs, pairs.size()),
                          com_loss(particle.theta, preshape.tcp, problem.com));
      }
      particle.in_collision = n_col > 0;
      particle.loss = loss;
      grads[j] = g;
      prior_grads[j] = prior_log_gradient(particle.theta, problem.stein.prior);
    });

    if (problem.record_trace) {
      for (std::size_t j = 0; j < n_particles; ++j) {
        TraceRecord rec;
        rec.iteration = k;
        rec.particle = j;
        rec.preshape_id = particles[j].preshape;
        rec.loss = particles[j].loss;
        rec.in_collision = particles[j].in_collision;
        rec.phase = stein_phase ? ParticlePhase::kStein : ParticlePhase::kSgd;
        rec.theta = particles[j].theta;
        solution.trace.push_back(rec);
      }
    }

    if (stein_phase) {
      const double gamma = annealing(k, problem.stein.annealing);
      // Particles of one preshape form one interacting population; poses of
      // different finger configurations live on different objectives and are
      // not coupled.
      for (std::size_t ps = 0; ps < problem.preshapes.size(); ++ps) {
        std::vector<std::size_t> members;
        for (std::size_t j = 0; j < n_particles; ++j)
          if (particles[j].preshape == ps) members.push_back(j);
        if (members.empty()) continue;
        std::vector<PoseParams> thetas;
        std::vector<GradientVector> lik, pri;
        thetas.reserve(members.size());
        for (std::size_t j : members) {
          thetas.push_back(particles[j].theta);
          lik.push_back(grads[j]);
          pri.push_back(prior_grads[j]);
        }
        const auto directions = svgd_direction(thetas, lik, pri, gamma,
                                               static_cast<double>(n_ref), problem.stein);
        const auto updated = svgd_update(thetas, directions, eta_stein);
        for (std::size_t idx = 0; idx < members.size(); ++idx)
          particles[members[idx]].theta = updated[idx];
      }
    } else {
      parallel_for(n_particles, problem.workers, [&](std::size_t j) {
        if (particles[j].converged) return;
        particles[j].theta = sgd_update(particles[j].theta, grads[j], problem.sgd);
      });
    }

    // Convergence bookkeeping: only meaningful once particles evolve
    // independently, and a collision always resets the flag.
    for (Particle& particle : particles) {
      if (stein_phase) continue;
      if (particle.converged) continue;
      if (particle.in_collision) {
        particle.converged = false;
      } else if (std::isfinite(particle.prev_loss) && particle.prev_loss > 0.0) {
        particle.converged = convergence_check(particle.loss, particle.prev_loss,
                                               problem.sgd.convergence_threshold,
                                               particle.in_collision);
      }
      particle.prev_loss = particle.loss;
    }
    if (stein_phase)
      for (Particle& particle : particles) particle.prev_loss = particle.loss;
  }

  // Final ranking: full-reference-cloud loss so particle losses are
  // comparable, restricted to collision-free candidates.
  solution.particles.resize(n_particles);
  parallel_for(n_particles, problem.workers, [&](std::size_t j) {
    const Particle& particle = particles[j];
    const Preshape& preshape = problem.preshapes[particle.preshape];
    ParticleSummary summary;
    summary.particle = j;
    summary.preshape_id = particle.preshape;
    summary.theta = particle.theta;
    summary.converged = particle.converged;
    const auto [colliding, n_col] =
        colliding_points(problem.sdf, preshape.sdf_index, problem.scene_cloud, particle.theta,
                         problem.contact_tolerance);
    summary.collision_free = n_col == 0;
    const PointCloud surface_world = apply_transform(particle.theta, preshape.inner_surface_cloud);
    const auto pairs = match_surface_to_pool(preshape.inner_surface_cloud, surface_world,
                                             problem.object_cloud);
    summary.full_cloud_loss = total_loss(contact_loss(pairs, pairs.size()),
                                         com_loss(particle.theta, preshape.tcp, problem.com));
    solution.particles[j] = summary;
  });

  const ParticleSummary* best = nullptr;
  for (const ParticleSummary& summary : solution.particles) {
    if (!summary.collision_free) continue;
    if (best == nullptr || summary.full_cloud_loss < best->full_cloud_loss) best = &summary;
  }
  if (best == nullptr) {
    // Report the best attempt anyway so callers can diagnose the failure.
    solution.status = GraspStatus::kNoGraspFound;
    const ParticleSummary* attempt = nullptr;
    for (const ParticleSummary& summary : solution.particles)
      if (attempt == nullptr || summary.full_cloud_loss < attempt->full_cloud_loss)
        attempt = &summary;
    solution.theta = attempt->theta;
    solution.preshape_id = attempt->preshape_id;
    solution.final_loss = attempt->full_cloud_loss;
    solution.converged = attempt->converged;
    return solution;
  }
  solution.status = GraspStatus::kFound;
  solution.theta = best->theta;
  solution.preshape_id = best->preshape_id;
  solution.final_loss = best->full_cloud_loss;
  solution.converged = best->converged;
  return solution;
}

}  // namespace graspmatch
