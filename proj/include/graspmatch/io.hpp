#pragma once

#include "graspmatch/grasp.hpp"
#include "graspmatch/types.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace graspmatch {

/// Loads a point cloud from a whitespace XYZ file or an ASCII /
/// binary_little_endian PLY file (format chosen by content, not extension).
/// Coordinates are interpreted as meters and scaled by `scale`. Rows carrying
/// non-finite values are rejected with the offending row in the message.
PointCloud load_cloud(const std::filesystem::path& path, double scale = 1.0);

enum class CloudFormat { kXyz, kPlyAscii, kPlyBinary };

/// Writes a cloud in the requested format. Binary PLY round-trips coordinates
/// bit-exactly (double precision properties).
void save_cloud(const std::filesystem::path& path, const PointCloud& cloud, CloudFormat format);

/// Pose initialization modes accepted by scenario configs.
enum class InitMode { kFibonacci, kGaussianMixture, kExplicit };

/// A full run description. All hyperparameters default to the standard
/// configuration so a minimal file only names the cloud files.
struct ScenarioConfig {
  std::filesystem::path object_cloud;
  std::optional<std::filesystem::path> scene_cloud;  // defaults to the object cloud
  struct PreshapeFiles {
    std::string id;
    std::filesystem::path inner_surface;
    std::filesystem::path full_cloud;
  };
  std::vector<PreshapeFiles> preshapes;

  double unit_scale = 1.0;  // e.g. 0.001 for millimeter datasets

  InitMode init_mode = InitMode::kFibonacci;
  std::size_t init_count = 100;
  std::size_t init_top_down = 6;
  double init_radius = 0.25;
  std::vector<PoseParams> init_explicit;      // kExplicit
  std::vector<PoseParams> init_means;         // kGaussianMixture
  Vec3 init_t_stddev{0.02, 0.02, 0.02};
  double init_q_stddev = 0.0;

  // Optimizer hyperparameters.
  std::size_t k_stein = 15;
  std::size_t k_max = 40;
  double learning_rate = 1.0;
  double convergence_threshold = 0.0002;
  std::size_t annealing_cycles = 5;
  double annealing_exponent = 2.0;
  double stein_step_scale = 1.0;

  // Collision field.
  double sdf_voxel = 0.005;
  double sdf_padding = -1.0;  // < 0 → 4 voxels
  double sdf_surface_band = 0.003;
  double stack_epsilon = 0.05;
  double contact_tolerance = 0.0;

  std::uint64_t seed = 0;
  int workers = 0;
  std::optional<Vec3> com;  // defaults to the object centroid

  std::optional<std::filesystem::path> report_path;
  std::optional<std::filesystem::path> trace_path;
  std::optional<std::filesystem::path> sdf_cache_dir;
};

/// Parses a JSON scenario file; unknown keys are rejected so typos fail fast.
ScenarioConfig load_scenario_config(const std::filesystem::path& path);

/// Self-describing run result.
struct GraspReport {
  GraspSolution solution;
  double wall_seconds = 0.0;
  std::string config_echo;  // fully resolved configuration as JSON text
  std::uint64_t config_hash = 0;
};

/// Loads the clouds, builds (or loads cached) preshape fields, runs the grasp
/// optimizer, and writes the report and optional trace.
GraspReport run_scenario(const ScenarioConfig& config);

/// Serializes a report as JSON text.
std::string report_to_json(const GraspReport& report);

/// Newline-delimited trace records behind a '#'-prefixed schema header.
void export_trace(const std::vector<TraceRecord>& trace, const std::filesystem::path& path);

/// Writes the bundled desk scenario (clouds + config) into a directory so the
/// CLI can run it end to end; returns the config path.
std::filesystem::path write_demo_scenario(const std::filesystem::path& directory);

}  // namespace graspmatch
