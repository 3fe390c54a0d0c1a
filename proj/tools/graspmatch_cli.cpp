// Command-line front end: run grasp scenarios, precompute collision fields,
// emit initial pose sets, and generate the bundled demo scenario.

#include "graspmatch/geometry.hpp"
#include "graspmatch/io.hpp"
#include "graspmatch/sdf.hpp"
#include "graspmatch/types.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace {

int run_grasp(const std::string& config_path, std::optional<std::uint64_t> seed,
              std::optional<int> workers, const std::string& trace,
              const std::string& report_path) {
  graspmatch::ScenarioConfig config = graspmatch::load_scenario_config(config_path);
  if (seed) config.seed = *seed;
  if (workers) config.workers = *workers;
  if (!trace.empty()) config.trace_path = trace;
  if (!report_path.empty()) config.report_path = report_path;

  const graspmatch::GraspReport report = graspmatch::run_scenario(config);
  const graspmatch::GraspSolution& sol = report.solution;

  std::size_t collision_free = 0;
  for (const auto& p : sol.particles) collision_free += p.collision_free ? 1 : 0;

  if (sol.status == graspmatch::GraspStatus::kFound) {
    std::printf("grasp found (preshape %zu, %zu/%zu collision-free particles, %.2fs)\n",
                sol.preshape_id, collision_free, sol.particles.size(), report.wall_seconds);
    std::printf("  t = [% .6f % .6f % .6f]\n", sol.theta.t.x(), sol.theta.t.y(), sol.theta.t.z());
    std::printf("  q = [% .6f % .6f % .6f % .6f]\n", sol.theta.q[0], sol.theta.q[1],
                sol.theta.q[2], sol.theta.q[3]);
    std::printf("  loss = %.8g, converged = %s\n", sol.final_loss,
                sol.converged ? "yes" : "no");
    if (!config.report_path) std::cout << graspmatch::report_to_json(report) << '\n';
    return 0;
  }
  std::fprintf(stderr, "no grasp found: all %zu particles end in collision (%.2fs)\n",
               sol.particles.size(), report.wall_seconds);
  return 1;
}

int run_sdf(const std::string& cloud_path, double voxel, double padding, double band,
            const std::string& out_path) {
  const graspmatch::PointCloud cloud = graspmatch::load_cloud(cloud_path);
  graspmatch::SdfBuildOptions options;
  options.padding = padding;
  options.surface_band = band;
  const graspmatch::SdfGrid grid = graspmatch::build_sdf(cloud, voxel, options);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw graspmatch::InvalidArgument("cannot write field: " + out_path);
  graspmatch::save_sdf(grid, out);
  std::printf("field %dx%dx%d nodes, voxel %.4g m, written to %s\n", grid.dims[0], grid.dims[1],
              grid.dims[2], grid.voxel, out_path.c_str());
  return 0;
}

int run_init(const std::string& mode, int count, int top_down, double radius,
             const std::vector<double>& center_values, const std::string& out_path) {
  graspmatch::Vec3 center(0.0, 0.0, 0.0);
  if (!center_values.empty()) {
    if (center_values.size() != 3) {
      throw graspmatch::InvalidArgument("--center needs exactly 3 values");
    }
    center = graspmatch::Vec3(center_values[0], center_values[1], center_values[2]);
  }
  std::vector<graspmatch::PoseParams> poses;
  if (mode == "fibonacci") {
    const int top = std::min(top_down, count);
    poses = graspmatch::fibonacci_quarter_sphere(count - top, radius, center);
    const auto ring = graspmatch::top_down_ring(top, radius, center);
    poses.insert(poses.end(), ring.begin(), ring.end());
  } else if (mode == "top-down") {
    poses = graspmatch::top_down_ring(count, radius, center);
  } else {
    throw graspmatch::InvalidArgument("unknown init mode '" + mode + "'");
  }

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw graspmatch::InvalidArgument("cannot write poses: " + out_path);
    out = &file;
  }
  (*out) << "{\n  \"poses\": [\n";
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const auto& p = poses[i];
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "    {\"t\": [%.17g, %.17g, %.17g], \"q\": [%.17g, %.17g, %.17g, %.17g]}%s\n",
                  p.t.x(), p.t.y(), p.t.z(), p.q[0], p.q[1], p.q[2], p.q[3],
                  i + 1 < poses.size() ? "," : "");
    (*out) << buf;
  }
  (*out) << "  ]\n}\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grasp pose synthesis by annealed Stein particle registration"};
  app.require_subcommand(1);

  // grasp
  std::string config_path, trace_path, report_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  CLI::App* grasp_cmd = app.add_subcommand("grasp", "Run a grasp scenario config");
  grasp_cmd->add_option("-c,--config", config_path, "Scenario JSON file")->required();
  grasp_cmd->add_option("--seed", seed, "Override the scenario seed");
  grasp_cmd->add_option("--workers", workers, "Worker threads (0 = all cores)");
  grasp_cmd->add_option("--trace", trace_path, "Write a per-iteration particle trace here");
  grasp_cmd->add_option("--report", report_path, "Write the JSON report here");

  // sdf
  std::string cloud_path, sdf_out;
  double voxel = 0.005, padding = -1.0, band = 0.003;
  CLI::App* sdf_cmd = app.add_subcommand("sdf", "Precompute a gripper collision field");
  sdf_cmd->add_option("--cloud", cloud_path, "Gripper surface cloud (PLY or XYZ)")->required();
  sdf_cmd->add_option("--voxel", voxel, "Grid spacing in meters")->check(CLI::PositiveNumber);
  sdf_cmd->add_option("--padding", padding, "Bounding box margin in meters (negative: 4 voxels)");
  sdf_cmd->add_option("--band", band, "Surface skin half-thickness in meters");
  sdf_cmd->add_option("-o,--out", sdf_out, "Output field file")->required();

  // init
  std::string init_mode = "fibonacci", init_out;
  int init_count = 100, init_top = 6;
  double init_radius = 0.25;
  std::vector<double> init_center;
  CLI::App* init_cmd = app.add_subcommand("init", "Emit an initial pose set as JSON");
  init_cmd->add_option("--mode", init_mode, "fibonacci | top-down");
  init_cmd->add_option("--count", init_count, "Number of poses")->check(CLI::PositiveNumber);
  init_cmd->add_option("--top-down", init_top, "Top-down poses included in fibonacci mode");
  init_cmd->add_option("--radius", init_radius, "Sphere radius in meters");
  init_cmd->add_option("--center", init_center, "Sphere center x y z")->expected(3);
  init_cmd->add_option("-o,--out", init_out, "Output file (default stdout)");

  // make-demo
  std::string demo_dir = "demo";
  CLI::App* demo_cmd = app.add_subcommand("make-demo", "Write the bundled desk scenario");
  demo_cmd->add_option("-d,--dir", demo_dir, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (grasp_cmd->parsed()) {
      return run_grasp(config_path, seed, workers, trace_path, report_path);
    }
    if (sdf_cmd->parsed()) return run_sdf(cloud_path, voxel, padding, band, sdf_out);
    if (init_cmd->parsed()) {
      return run_init(init_mode, init_count, init_top, init_radius, init_center, init_out);
    }
    if (demo_cmd->parsed()) {
      const auto config = graspmatch::write_demo_scenario(demo_dir);
      std::printf("demo scenario written; run: graspmatch grasp -c %s\n", config.string().c_str());
      return 0;
    }
  } catch (const graspmatch::InvalidArgument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
