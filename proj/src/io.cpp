#include "graspmatch/io.hpp"

#include "graspmatch/geometry.hpp"
#include "graspmatch/synthetic.hpp"

#include <json.hpp>

#include <bit>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace graspmatch {
namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "binary cloud and field serialization assumes a little-endian host");

[[noreturn]] void fail(const std::string& message) { throw InvalidArgument(message); }

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool parse_double(const std::string& token, double& out) {
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

void require_finite_row(const Vec3& p, std::size_t row, const std::filesystem::path& path) {
  if (std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z())) return;
  fail("non-finite coordinate in row " + std::to_string(row) + " of " + path.string());
}

// --- PLY ------------------------------------------------------------------

struct PlyProperty {
  std::string name;
  std::size_t size = 0;   // bytes in binary encoding
  bool is_double = false; // float64 vs float32 for coordinate reads
  bool is_float = false;  // any floating type
};

struct PlyHeader {
  bool binary = false;
  std::size_t vertex_count = 0;
  std::vector<PlyProperty> properties;  // of the vertex element
  std::size_t header_bytes = 0;
};

std::size_t ply_type_size(const std::string& t) {
  if (t == "char" || t == "int8" || t == "uchar" || t == "uint8") return 1;
  if (t == "short" || t == "int16" || t == "ushort" || t == "uint16") return 2;
  if (t == "int" || t == "int32" || t == "uint" || t == "uint32" || t == "float" ||
      t == "float32")
    return 4;
  if (t == "double" || t == "float64") return 8;
  return 0;
}

PlyHeader parse_ply_header(const std::string& content, const std::filesystem::path& path) {
  PlyHeader header;
  std::size_t pos = 0;
  bool in_vertex_element = false;
  bool saw_vertex_element = false;
  bool saw_format = false;
  bool ended = false;
  while (pos < content.size()) {
    std::size_t eol = content.find('\n', pos);
    if (eol == std::string::npos) break;
    std::string line = content.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = eol + 1;

    std::istringstream ls(line);
    std::string keyword;
    ls >> keyword;
    if (keyword == "ply" || keyword == "comment" || keyword == "obj_info" || keyword.empty()) {
      continue;
    }
    if (keyword == "format") {
      std::string fmt, version;
      ls >> fmt >> version;
      if (fmt == "ascii") {
        header.binary = false;
      } else if (fmt == "binary_little_endian") {
        header.binary = true;
      } else {
        fail("unsupported PLY format '" + fmt + "' in " + path.string());
      }
      saw_format = true;
    } else if (keyword == "element") {
      std::string name;
      std::size_t count = 0;
      ls >> name >> count;
      if (name == "vertex") {
        if (saw_vertex_element) fail("duplicate vertex element in " + path.string());
        header.vertex_count = count;
        in_vertex_element = true;
        saw_vertex_element = true;
      } else {
        if (!saw_vertex_element && count > 0) {
          fail("PLY element '" + name + "' precedes the vertex data in " + path.string() +
               "; only vertex-first files are supported");
        }
        in_vertex_element = false;
      }
    } else if (keyword == "property") {
      if (!in_vertex_element) continue;  // trailing elements are never read
      std::string type;
      ls >> type;
      if (type == "list") {
        fail("list property on the vertex element is unsupported in " + path.string());
      }
      PlyProperty prop;
      prop.size = ply_type_size(type);
      if (prop.size == 0) fail("unknown PLY property type '" + type + "' in " + path.string());
      prop.is_double = (type == "double" || type == "float64");
      prop.is_float = prop.is_double || type == "float" || type == "float32";
      ls >> prop.name;
      header.properties.push_back(prop);
    } else if (keyword == "end_header") {
      ended = true;
      break;
    } else {
      fail("unrecognized PLY header line '" + line + "' in " + path.string());
    }
  }
  if (!ended || !saw_format) fail("truncated PLY header in " + path.string());
  if (!saw_vertex_element) fail("PLY file has no vertex element: " + path.string());
  header.header_bytes = pos;
  return header;
}

PointCloud load_ply(const std::string& content, const std::filesystem::path& path, double scale) {
  const PlyHeader header = parse_ply_header(content, path);

  int coord_slot[3] = {-1, -1, -1};
  for (std::size_t i = 0; i < header.properties.size(); ++i) {
    const std::string& n = header.properties[i].name;
    int axis = (n == "x") ? 0 : (n == "y") ? 1 : (n == "z") ? 2 : -1;
    if (axis < 0) continue;
    if (!header.properties[i].is_float) {
      fail("PLY coordinate property '" + n + "' must be float or double in " + path.string());
    }
    coord_slot[axis] = static_cast<int>(i);
  }
  if (coord_slot[0] < 0 || coord_slot[1] < 0 || coord_slot[2] < 0) {
    fail("PLY vertex element lacks x/y/z properties in " + path.string());
  }

  PointCloud cloud;
  cloud.reserve(header.vertex_count);

  if (header.binary) {
    std::size_t stride = 0;
    std::vector<std::size_t> offsets(header.properties.size());
    for (std::size_t i = 0; i < header.properties.size(); ++i) {
      offsets[i] = stride;
      stride += header.properties[i].size;
    }
    const std::size_t need = header.header_bytes + stride * header.vertex_count;
    if (content.size() < need) fail("binary PLY payload truncated in " + path.string());
    const char* base = content.data() + header.header_bytes;
    for (std::size_t v = 0; v < header.vertex_count; ++v) {
      Vec3 p;
      for (int axis = 0; axis < 3; ++axis) {
        const PlyProperty& prop = header.properties[static_cast<std::size_t>(coord_slot[axis])];
        const char* src = base + v * stride + offsets[static_cast<std::size_t>(coord_slot[axis])];
        if (prop.is_double) {
          double d;
          std::memcpy(&d, src, sizeof(d));
          p[axis] = d;
        } else {
          float f;
          std::memcpy(&f, src, sizeof(f));
          p[axis] = static_cast<double>(f);
        }
      }
      require_finite_row(p, v, path);
      cloud.push_back(p * scale);
    }
  } else {
    std::istringstream body(content.substr(header.header_bytes));
    std::vector<double> fields(header.properties.size());
    for (std::size_t v = 0; v < header.vertex_count; ++v) {
      for (std::size_t i = 0; i < header.properties.size(); ++i) {
        if (!(body >> fields[i])) {
          fail("ASCII PLY payload truncated at vertex " + std::to_string(v) + " in " +
               path.string());
        }
      }
      Vec3 p(fields[static_cast<std::size_t>(coord_slot[0])],
             fields[static_cast<std::size_t>(coord_slot[1])],
             fields[static_cast<std::size_t>(coord_slot[2])]);
      require_finite_row(p, v, path);
      cloud.push_back(p * scale);
    }
  }
  return cloud;
}

PointCloud load_xyz(const std::string& content, const std::filesystem::path& path, double scale) {
  PointCloud cloud;
  std::istringstream in(content);
  std::string line;
  std::size_t row = 0;  // counts data rows, not file lines
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string t0, t1, t2;
    if (!(ls >> t0)) continue;           // blank line
    if (t0[0] == '#') continue;          // comment
    if (!(ls >> t1 >> t2)) {
      fail("line " + std::to_string(line_no) + " of " + path.string() +
           " has fewer than 3 coordinates");
    }
    Vec3 p;
    if (!parse_double(t0, p.x()) || !parse_double(t1, p.y()) || !parse_double(t2, p.z())) {
      // Tokens like "nan"/"inf" parse via from_chars; anything else is malformed.
      fail("unparseable coordinate on line " + std::to_string(line_no) + " of " + path.string());
    }
    require_finite_row(p, row, path);
    cloud.push_back(p * scale);
    ++row;
  }
  return cloud;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void format_double(std::ostream& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  out.write(buf, ptr - buf);
}

// --- JSON helpers -----------------------------------------------------------

void reject_unknown_keys(const json& object, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  for (auto it = object.begin(); it != object.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) fail("unknown key '" + it.key() + "' in " + where);
  }
}

Vec3 vec3_from(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) fail(where + " must be an array of 3 numbers");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

PoseParams pose_from(const json& j, const std::string& where) {
  reject_unknown_keys(j, {"t", "q"}, where);
  PoseParams pose;
  if (j.contains("t")) pose.t = vec3_from(j.at("t"), where + ".t");
  if (j.contains("q")) {
    const json& q = j.at("q");
    if (!q.is_array() || q.size() != 4) fail(where + ".q must be an array of 4 numbers");
    pose.q = Vec4(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>());
    pose.q = normalized_quaternion(pose.q);
  }
  return pose;
}

json pose_to_json(const PoseParams& pose) {
  return json{{"t", {pose.t.x(), pose.t.y(), pose.t.z()}},
              {"q", {pose.q[0], pose.q[1], pose.q[2], pose.q[3]}}};
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 1469598103934665603ULL) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t cloud_hash(const PointCloud& cloud) {
  std::uint64_t h = fnv1a(nullptr, 0);
  for (const Vec3& p : cloud) {
    const double coords[3] = {p.x(), p.y(), p.z()};
    h = fnv1a(coords, sizeof(coords), h);
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& rel) {
  std::filesystem::path p(rel);
  return p.is_absolute() ? p : base / p;
}

json resolved_config_json(const ScenarioConfig& c) {
  json init{{"mode", c.init_mode == InitMode::kFibonacci        ? "fibonacci"
             : c.init_mode == InitMode::kGaussianMixture        ? "gaussian-mixture"
                                                                : "explicit"},
            {"count", c.init_count},
            {"top_down", c.init_top_down},
            {"radius", c.init_radius},
            {"t_stddev", {c.init_t_stddev.x(), c.init_t_stddev.y(), c.init_t_stddev.z()}},
            {"q_stddev", c.init_q_stddev}};
  if (!c.init_means.empty()) {
    json means = json::array();
    for (const PoseParams& m : c.init_means) means.push_back(pose_to_json(m));
    init["means"] = means;
  }
  if (!c.init_explicit.empty()) {
    json poses = json::array();
    for (const PoseParams& m : c.init_explicit) poses.push_back(pose_to_json(m));
    init["poses"] = poses;
  }
  json preshapes = json::array();
  for (const auto& p : c.preshapes) {
    preshapes.push_back(json{{"id", p.id},
                             {"inner_surface", p.inner_surface.string()},
                             {"full_cloud", p.full_cloud.string()}});
  }
  json out{{"object_cloud", c.object_cloud.string()},
           {"unit_scale", c.unit_scale},
           {"preshapes", preshapes},
           {"init", init},
           {"optimizer",
            {{"k_stein", c.k_stein},
             {"k_max", c.k_max},
             {"learning_rate", c.learning_rate},
             {"convergence_threshold", c.convergence_threshold},
             {"annealing_cycles", c.annealing_cycles},
             {"annealing_exponent", c.annealing_exponent},
             {"stein_step_scale", c.stein_step_scale}}},
           {"collision",
            {{"voxel", c.sdf_voxel},
             {"padding", c.sdf_padding},
             {"surface_band", c.sdf_surface_band},
             {"stack_epsilon", c.stack_epsilon},
             {"contact_tolerance", c.contact_tolerance}}},
           {"seed", c.seed},
           {"workers", c.workers}};
  if (c.scene_cloud) out["scene_cloud"] = c.scene_cloud->string();
  if (c.com) out["com"] = {c.com->x(), c.com->y(), c.com->z()};
  if (c.report_path) out["report"] = c.report_path->string();
  if (c.trace_path) out["trace"] = c.trace_path->string();
  if (c.sdf_cache_dir) out["sdf_cache"] = c.sdf_cache_dir->string();
  return out;
}

}  // namespace

PointCloud load_cloud(const std::filesystem::path& path, double scale) {
  const std::string content = read_file(path);
  const bool is_ply = content.size() >= 4 && content.compare(0, 3, "ply") == 0 &&
                      (content[3] == '\n' || content[3] == '\r');
  PointCloud cloud = is_ply ? load_ply(content, path, scale) : load_xyz(content, path, scale);
  if (cloud.empty()) fail("no points found in " + path.string());
  return cloud;
}

void save_cloud(const std::filesystem::path& path, const PointCloud& cloud, CloudFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write file: " + path.string());
  switch (format) {
    case CloudFormat::kXyz:
      for (const Vec3& p : cloud) {
        format_double(out, p.x());
        out << ' ';
        format_double(out, p.y());
        out << ' ';
        format_double(out, p.z());
        out << '\n';
      }
      break;
    case CloudFormat::kPlyAscii:
    case CloudFormat::kPlyBinary: {
      const bool binary = format == CloudFormat::kPlyBinary;
      out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
          << "element vertex " << cloud.size() << "\n"
          << "property double x\nproperty double y\nproperty double z\nend_header\n";
      if (binary) {
        for (const Vec3& p : cloud) {
          const double coords[3] = {p.x(), p.y(), p.z()};
          out.write(reinterpret_cast<const char*>(coords), sizeof(coords));
        }
      } else {
        for (const Vec3& p : cloud) {
          format_double(out, p.x());
          out << ' ';
          format_double(out, p.y());
          out << ' ';
          format_double(out, p.z());
          out << '\n';
        }
      }
      break;
    }
  }
  if (!out) fail("write failed: " + path.string());
}

ScenarioConfig load_scenario_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    fail("cannot parse scenario config " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) fail("scenario config must be a JSON object: " + path.string());
  reject_unknown_keys(j,
                      {"object_cloud", "scene_cloud", "unit_scale", "preshapes", "com", "init",
                       "optimizer", "collision", "seed", "workers", "report", "trace",
                       "sdf_cache"},
                      path.string());

  const std::filesystem::path base = path.has_parent_path()
                                         ? path.parent_path()
                                         : std::filesystem::path(".");
  ScenarioConfig c;
  if (!j.contains("object_cloud")) fail("scenario config misses 'object_cloud': " + path.string());
  c.object_cloud = resolve(base, j.at("object_cloud").get<std::string>());
  if (j.contains("scene_cloud")) {
    c.scene_cloud = resolve(base, j.at("scene_cloud").get<std::string>());
  }
  if (j.contains("unit_scale")) c.unit_scale = j.at("unit_scale").get<double>();
  if (c.unit_scale <= 0.0) fail("unit_scale must be positive in " + path.string());

  if (!j.contains("preshapes") || !j.at("preshapes").is_array() || j.at("preshapes").empty()) {
    fail("scenario config needs a non-empty 'preshapes' array: " + path.string());
  }
  for (const json& pj : j.at("preshapes")) {
    reject_unknown_keys(pj, {"id", "inner_surface", "full_cloud"}, "preshapes entry");
    ScenarioConfig::PreshapeFiles files;
    files.id = pj.at("id").get<std::string>();
    files.inner_surface = resolve(base, pj.at("inner_surface").get<std::string>());
    files.full_cloud = resolve(base, pj.at("full_cloud").get<std::string>());
    c.preshapes.push_back(std::move(files));
  }
  if (j.contains("com")) c.com = vec3_from(j.at("com"), "com");

  if (j.contains("init")) {
    const json& init = j.at("init");
    reject_unknown_keys(
        init, {"mode", "count", "top_down", "radius", "means", "poses", "t_stddev", "q_stddev"},
        "init");
    if (init.contains("mode")) {
      const std::string mode = lower(init.at("mode").get<std::string>());
      if (mode == "fibonacci") {
        c.init_mode = InitMode::kFibonacci;
      } else if (mode == "gaussian-mixture" || mode == "gaussian_mixture") {
        c.init_mode = InitMode::kGaussianMixture;
      } else if (mode == "explicit") {
        c.init_mode = InitMode::kExplicit;
      } else {
        fail("unknown init mode '" + mode + "'");
      }
    }
    if (init.contains("count")) c.init_count = init.at("count").get<std::size_t>();
    if (init.contains("top_down")) c.init_top_down = init.at("top_down").get<std::size_t>();
    if (init.contains("radius")) c.init_radius = init.at("radius").get<double>();
    if (init.contains("t_stddev")) c.init_t_stddev = vec3_from(init.at("t_stddev"), "t_stddev");
    if (init.contains("q_stddev")) c.init_q_stddev = init.at("q_stddev").get<double>();
    if (init.contains("means")) {
      for (const json& m : init.at("means")) c.init_means.push_back(pose_from(m, "init.means"));
    }
    if (init.contains("poses")) {
      for (const json& m : init.at("poses")) {
        c.init_explicit.push_back(pose_from(m, "init.poses"));
      }
    }
  }
  if (c.init_mode == InitMode::kGaussianMixture && c.init_means.empty()) {
    fail("gaussian-mixture init requires 'init.means'");
  }
  if (c.init_mode == InitMode::kExplicit && c.init_explicit.empty()) {
    fail("explicit init requires 'init.poses'");
  }

  if (j.contains("optimizer")) {
    const json& opt = j.at("optimizer");
    reject_unknown_keys(opt,
                        {"k_stein", "k_max", "learning_rate", "convergence_threshold",
                         "annealing_cycles", "annealing_exponent", "stein_step_scale"},
                        "optimizer");
    if (opt.contains("k_stein")) c.k_stein = opt.at("k_stein").get<std::size_t>();
    if (opt.contains("k_max")) c.k_max = opt.at("k_max").get<std::size_t>();
    if (opt.contains("learning_rate")) c.learning_rate = opt.at("learning_rate").get<double>();
    if (opt.contains("convergence_threshold")) {
      c.convergence_threshold = opt.at("convergence_threshold").get<double>();
    }
    if (opt.contains("annealing_cycles")) {
      c.annealing_cycles = opt.at("annealing_cycles").get<std::size_t>();
    }
    if (opt.contains("annealing_exponent")) {
      c.annealing_exponent = opt.at("annealing_exponent").get<double>();
    }
    if (opt.contains("stein_step_scale")) {
      c.stein_step_scale = opt.at("stein_step_scale").get<double>();
    }
  }
  if (c.k_stein > c.k_max) fail("optimizer.k_stein must not exceed optimizer.k_max");

  if (j.contains("collision")) {
    const json& col = j.at("collision");
    reject_unknown_keys(
        col, {"voxel", "padding", "surface_band", "stack_epsilon", "contact_tolerance"},
        "collision");
    if (col.contains("voxel")) c.sdf_voxel = col.at("voxel").get<double>();
    if (col.contains("padding")) c.sdf_padding = col.at("padding").get<double>();
    if (col.contains("surface_band")) c.sdf_surface_band = col.at("surface_band").get<double>();
    if (col.contains("stack_epsilon")) c.stack_epsilon = col.at("stack_epsilon").get<double>();
    if (col.contains("contact_tolerance")) {
      c.contact_tolerance = col.at("contact_tolerance").get<double>();
    }
  }
  if (c.sdf_voxel <= 0.0) fail("collision.voxel must be positive");

  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("workers")) c.workers = j.at("workers").get<int>();
  if (j.contains("report")) c.report_path = resolve(base, j.at("report").get<std::string>());
  if (j.contains("trace")) c.trace_path = resolve(base, j.at("trace").get<std::string>());
  if (j.contains("sdf_cache")) c.sdf_cache_dir = resolve(base, j.at("sdf_cache").get<std::string>());
  return c;
}

namespace {

SdfGrid cached_build_sdf(const PointCloud& full_cloud, const ScenarioConfig& c) {
  SdfBuildOptions options;
  options.padding = c.sdf_padding >= 0.0 ? c.sdf_padding : 4.0 * c.sdf_voxel;
  options.surface_band = c.sdf_surface_band;
  if (!c.sdf_cache_dir) return build_sdf(full_cloud, c.sdf_voxel, options);

  std::uint64_t key = cloud_hash(full_cloud);
  const double params[3] = {c.sdf_voxel, options.padding, options.surface_band};
  key = fnv1a(params, sizeof(params), key);
  std::filesystem::create_directories(*c.sdf_cache_dir);
  const std::filesystem::path file = *c.sdf_cache_dir / ("field_" + hex64(key) + ".bin");
  if (std::filesystem::exists(file)) {
    std::ifstream in(file, std::ios::binary);
    if (in) {
      try {
        return load_sdf(in);
      } catch (const InvalidArgument&) {
        // Corrupt cache entry: fall through and rebuild.
      }
    }
  }
  SdfGrid grid = build_sdf(full_cloud, c.sdf_voxel, options);
  std::ofstream out(file, std::ios::binary);
  if (out) save_sdf(grid, out);
  return grid;
}

std::vector<PoseParams> make_initializations(const ScenarioConfig& c, std::size_t count,
                                             const Vec3& com, std::uint64_t preshape_index) {
  switch (c.init_mode) {
    case InitMode::kFibonacci: {
      const std::size_t top = std::min(c.init_top_down, count);
      std::vector<PoseParams> poses =
          fibonacci_quarter_sphere(static_cast<int>(count - top), c.init_radius, com);
      std::vector<PoseParams> ring = top_down_ring(static_cast<int>(top), c.init_radius, com);
      poses.insert(poses.end(), ring.begin(), ring.end());
      return poses;
    }
    case InitMode::kGaussianMixture: {
      PoseStddev stddev;
      stddev.t = c.init_t_stddev;
      stddev.q = c.init_q_stddev;
      return gaussian_mixture_init(c.init_means, stddev, count,
                                   c.seed * 1000003ULL + preshape_index);
    }
    case InitMode::kExplicit:
      return c.init_explicit;
  }
  fail("unreachable init mode");
}

}  // namespace

GraspReport run_scenario(const ScenarioConfig& config) {
  GraspProblem problem;
  problem.object_cloud = load_cloud(config.object_cloud, config.unit_scale);
  problem.scene_cloud = config.scene_cloud ? load_cloud(*config.scene_cloud, config.unit_scale)
                                           : problem.object_cloud;
  problem.com = config.com ? *config.com : centroid(problem.object_cloud);

  std::vector<SdfGrid> grids;
  for (std::size_t i = 0; i < config.preshapes.size(); ++i) {
    const auto& files = config.preshapes[i];
    Preshape preshape;
    preshape.id = files.id;
    preshape.inner_surface_cloud = load_cloud(files.inner_surface, config.unit_scale);
    preshape.full_cloud = load_cloud(files.full_cloud, config.unit_scale);
    preshape.tcp = tool_centre_point(preshape.inner_surface_cloud);
    preshape.sdf_index = i;
    grids.push_back(cached_build_sdf(preshape.full_cloud, config));
    problem.preshapes.push_back(std::move(preshape));
  }
  problem.sdf = stack_preshapes(std::move(grids), config.stack_epsilon);

  const std::size_t per_preshape = particles_per_preshape(
      config.init_count, config.init_top_down, config.preshapes.size());
  for (std::size_t i = 0; i < config.preshapes.size(); ++i) {
    problem.initializations.push_back(make_initializations(config, per_preshape, problem.com, i));
  }

  problem.sgd.learning_rate = config.learning_rate;
  problem.sgd.convergence_threshold = config.convergence_threshold;
  problem.stein.annealing.period_total = config.k_max;
  problem.stein.annealing.cycles = config.annealing_cycles;
  problem.stein.annealing.exponent = config.annealing_exponent;
  problem.stein.stein_iterations = config.k_stein;
  problem.stein.step_scale = config.stein_step_scale;
  problem.k_stein = config.k_stein;
  problem.k_max = config.k_max;
  problem.contact_tolerance = config.contact_tolerance;
  problem.seed = config.seed;
  problem.workers = config.workers;
  problem.record_trace = config.trace_path.has_value();

  GraspReport report;
  const json echo = resolved_config_json(config);
  report.config_echo = echo.dump(2);
  report.config_hash = fnv1a(report.config_echo.data(), report.config_echo.size());

  const auto start = std::chrono::steady_clock::now();
  report.solution = optimize_grasp(problem);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                            .count();

  if (config.trace_path) export_trace(report.solution.trace, *config.trace_path);
  if (config.report_path) {
    std::ofstream out(*config.report_path);
    if (!out) fail("cannot write report: " + config.report_path->string());
    out << report_to_json(report) << '\n';
  }
  return report;
}

std::string report_to_json(const GraspReport& report) {
  const GraspSolution& sol = report.solution;
  json particles = json::array();
  for (const ParticleSummary& p : sol.particles) {
    particles.push_back(json{{"particle", p.particle},
                             {"preshape", p.preshape_id},
                             {"pose", pose_to_json(p.theta)},
                             {"loss", p.full_cloud_loss},
                             {"collision_free", p.collision_free},
                             {"converged", p.converged}});
  }
  json out{{"status", sol.status == GraspStatus::kFound ? "found" : "no_grasp_found"},
           {"pose", pose_to_json(sol.theta)},
           {"preshape", sol.preshape_id},
           {"loss", sol.final_loss},
           {"converged", sol.converged},
           {"wall_seconds", report.wall_seconds},
           {"particles", particles},
           {"config_hash", hex64(report.config_hash)},
           {"config", json::parse(report.config_echo)}};
  return out.dump(2);
}

void export_trace(const std::vector<TraceRecord>& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write trace: " + path.string());
  out << "# graspmatch trace v1: iteration particle preshape phase loss in_collision"
         " tx ty tz qw qx qy qz\n";
  for (const TraceRecord& r : trace) {
    out << r.iteration << ' ' << r.particle << ' ' << r.preshape_id << ' '
        << (r.phase == ParticlePhase::kStein ? "stein" : "sgd") << ' ';
    format_double(out, r.loss);
    out << ' ' << (r.in_collision ? 1 : 0);
    const double pose[7] = {r.theta.t.x(), r.theta.t.y(), r.theta.t.z(), r.theta.q[0],
                            r.theta.q[1], r.theta.q[2], r.theta.q[3]};
    for (double v : pose) {
      out << ' ';
      format_double(out, v);
    }
    out << '\n';
  }
  if (!out) fail("trace write failed: " + path.string());
}

std::filesystem::path write_demo_scenario(const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  const synthetic::DeskScenario scenario = synthetic::desk_scenario();

  save_cloud(directory / "object.ply", scenario.object, CloudFormat::kPlyBinary);
  save_cloud(directory / "scene.ply", scenario.scene, CloudFormat::kPlyBinary);
  save_cloud(directory / "gripper_contact.ply", scenario.gripper.preshape.inner_surface_cloud,
             CloudFormat::kPlyBinary);
  save_cloud(directory / "gripper_full.ply", scenario.gripper.preshape.full_cloud,
             CloudFormat::kPlyBinary);

  json config{{"object_cloud", "object.ply"},
              {"scene_cloud", "scene.ply"},
              {"preshapes", json::array({json{{"id", "parallel-jaw"},
                                              {"inner_surface", "gripper_contact.ply"},
                                              {"full_cloud", "gripper_full.ply"}}})},
              {"com", {scenario.com.x(), scenario.com.y(), scenario.com.z()}},
              {"init", {{"mode", "fibonacci"}, {"count", 100}, {"top_down", 6}, {"radius", 0.25}}},
              {"optimizer", {{"k_stein", 15}, {"k_max", 40}}},
              {"collision", {{"voxel", 0.005}, {"stack_epsilon", 0.05}}},
              {"seed", 0},
              {"report", "report.json"},
              {"sdf_cache", "cache"}};
  const std::filesystem::path config_path = directory / "scenario.json";
  std::ofstream out(config_path);
  if (!out) fail("cannot write demo config: " + config_path.string());
  out << config.dump(2) << '\n';
  return config_path;
}

}  // namespace graspmatch
