#include "graspmatch/sdf.hpp"

#include "graspmatch/geometry.hpp"
#include "graspmatch/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <queue>
#include <utility>

namespace graspmatch {

namespace {

// 95th-percentile nearest-neighbor spacing of the cloud, used to size the
// surface band so it spans the gaps between neighboring samples. Estimated
// on a deterministic subsample to keep construction cheap.
double sample_spacing(const PointCloud& cloud) {
  std::vector<double> nn;
  const std::size_t stride = std::max<std::size_t>(1, cloud.size() / 512);
  nn.reserve(cloud.size() / stride + 1);
  for (std::size_t i = 0; i < cloud.size(); i += stride) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cloud.size(); ++j) {
      if (j == i) continue;
      best = std::min(best, (cloud[i] - cloud[j]).squaredNorm());
    }
    nn.push_back(std::sqrt(best));
  }
  std::sort(nn.begin(), nn.end());
  return nn.empty() ? 0.0 : nn[static_cast<std::size_t>(0.95 * (nn.size() - 1))];
}

bool coplanar(const PointCloud& cloud) {
  if (cloud.size() < 4) return true;
  const Vec3 c = centroid(cloud);
  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : cloud) cov += (p - c) * (p - c).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  return eig.eigenvalues()(0) <= 1e-18 * std::max(1.0, eig.eigenvalues()(2));
}

}  // namespace

SdfGrid build_sdf(const PointCloud& cloud, double voxel, const SdfBuildOptions& options) {
  require(voxel > 0.0, "build_sdf: voxel must be positive");
  require(cloud.size() >= 4 && !coplanar(cloud), "build_sdf: need >= 4 non-coplanar points");

  const double padding = options.padding >= 0.0 ? options.padding : 4.0 * voxel;
  Vec3 lo = cloud.front(), hi = cloud.front();
  for (const Vec3& p : cloud) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  lo -= Vec3::Constant(padding);
  hi += Vec3::Constant(padding);

  SdfGrid grid;
  grid.origin = lo;
  grid.voxel = voxel;
  for (int a = 0; a < 3; ++a)
    grid.dims[a] = static_cast<std::int32_t>(std::ceil((hi[a] - lo[a]) / voxel)) + 1;
  const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];
  const std::size_t total = static_cast<std::size_t>(nx) * ny * nz;
  grid.values.resize(total);

  const NnIndex index = build_index(cloud);

  // The surface band (skin) sets how deep a point must sink past the sampled
  // surface before its value turns positive; the closure term widens it with
  // the lattice and sampling pitch so the band always spans at least one
  // layer of nodes on evenly sampled clouds.
  const double spacing = sample_spacing(cloud);
  const double closure = 1.05 * std::sqrt(0.25 * voxel * voxel + 0.5 * spacing * spacing);
  const double skin = std::max(options.surface_band, closure);

  std::vector<float> dist(total);
  for (int ix = 0; ix < nx; ++ix)
    for (int iy = 0; iy < ny; ++iy)
      for (int iz = 0; iz < nz; ++iz) {
        const std::size_t id = grid.node_index(ix, iy, iz);
        dist[id] = static_cast<float>(index.nearest(grid.node_position(ix, iy, iz)).distance);
      }

  // Sign resolution: a node is exterior iff some 6-connected path from the
  // grid boundary reaches it without ever getting much closer to the samples
  // than the node's own distance. The max-min-clearance (widest-path) search
  // behaves like the classic boundary flood fill on dense, evenly sampled
  // clouds, but the per-node threshold also keeps the interior of sparsely
  // sampled solids positive where any fixed-threshold fill would leak
  // through sampling gaps, while open pockets that are wider than their
  // entrances stay exterior.
  std::vector<float> clearance(total, 0.0f);
  std::priority_queue<std::pair<float, std::size_t>> heap;
  auto seed = [&](int ix, int iy, int iz) {
    const std::size_t id = grid.node_index(ix, iy, iz);
    if (clearance[id] < dist[id]) {
      clearance[id] = dist[id];
      heap.emplace(clearance[id], id);
    }
  };
  for (int ix = 0; ix < nx; ++ix)
    for (int iy = 0; iy < ny; ++iy) {
      seed(ix, iy, 0);
      seed(ix, iy, nz - 1);
    }
  for (int ix = 0; ix < nx; ++ix)
    for (int iz = 0; iz < nz; ++iz) {
      seed(ix, 0, iz);
      seed(ix, ny - 1, iz);
    }
  for (int iy = 0; iy < ny; ++iy)
    for (int iz = 0; iz < nz; ++iz) {
      seed(0, iy, iz);
      seed(nx - 1, iy, iz);
    }
  while (!heap.empty()) {
    const auto [c, id] = heap.top();
    heap.pop();
    if (c < clearance[id]) continue;
    const int iz = static_cast<int>(id % nz);
    const int iy = static_cast<int>((id / nz) % ny);
    const int ix = static_cast<int>(id / (static_cast<std::size_t>(ny) * nz));
    const auto relax = [&](int jx, int jy, int jz) {
      if (jx < 0 || jy < 0 || jz < 0 || jx >= nx || jy >= ny || jz >= nz) return;
      const std::size_t jd = grid.node_index(jx, jy, jz);
      const float cand = std::min(c, dist[jd]);
      if (cand > clearance[jd]) {
        clearance[jd] = cand;
        heap.emplace(cand, jd);
      }
    };
    relax(ix + 1, iy, iz);
    relax(ix - 1, iy, iz);
    relax(ix, iy + 1, iz);
    relax(ix, iy - 1, iz);
    relax(ix, iy, iz + 1);
    relax(ix, iy, iz - 1);
  }

  // A genuinely open node has clearance ~= its own distance (escape paths
  // only lose distance to second-order lattice effects), while any node
  // sealed behind the sampled surface has clearance pinned at the
  // sampling/lattice scale regardless of how deep it sits. The fixed ratio
  // separates the two regimes without an absolute length scale.
  constexpr float kEscapeRatio = 0.9f;

  // Exterior nodes store the exact negative distance. Interior nodes store
  // distance-minus-skin, which is linear in penetration depth, so the
  // interpolated zero crossing sits at skin depth instead of drifting toward
  // the surface where small near-surface values meet large interior ones. A
  // convex interpolation of the non-positive values around the surface can
  // never fabricate a collision outside the solid.
  for (std::size_t id = 0; id < total; ++id) {
    const bool exterior = clearance[id] >= kEscapeRatio * dist[id];
    grid.values[id] = exterior ? -dist[id] : dist[id] - static_cast<float>(skin);
  }

  // Cache the largest magnitude on the grid boundary so out-of-grid queries
  // can stay strictly negative.
  double boundary_max = 0.0;
  for (int ix = 0; ix < nx; ++ix)
    for (int iy = 0; iy < ny; ++iy)
      for (int iz = 0; iz < nz; ++iz) {
        if (ix != 0 && iy != 0 && iz != 0 && ix != nx - 1 && iy != ny - 1 && iz != nz - 1)
          continue;
        boundary_max = std::max(boundary_max,
                                std::abs(static_cast<double>(grid.values[grid.node_index(ix, iy, iz)])));
      }
  grid.boundary_max_abs = boundary_max;
  return grid;
}

double query(const SdfGrid& sdf, const Vec3& p) {
  const Vec3 hi = sdf.max_corner();
  if ((p.array() < sdf.origin.array()).any() || (p.array() > hi.array()).any()) {
    const Vec3 clamped = p.cwiseMax(sdf.origin).cwiseMin(hi);
    return -((p - clamped).norm() + sdf.boundary_max_abs);
  }
  const Vec3 local = (p - sdf.origin) / sdf.voxel;
  int ix = std::min(static_cast<int>(local[0]), sdf.dims[0] - 2);
  int iy = std::min(static_cast<int>(local[1]), sdf.dims[1] - 2);
  int iz = std::min(static_cast<int>(local[2]), sdf.dims[2] - 2);
  ix = std::max(ix, 0);
  iy = std::max(iy, 0);
  iz = std::max(iz, 0);
  const double fx = std::clamp(local[0] - ix, 0.0, 1.0);
  const double fy = std::clamp(local[1] - iy, 0.0, 1.0);
  const double fz = std::clamp(local[2] - iz, 0.0, 1.0);
  auto v = [&](int dx, int dy, int dz) {
    return static_cast<double>(sdf.values[sdf.node_index(ix + dx, iy + dy, iz + dz)]);
  };
  const double c00 = v(0, 0, 0) * (1 - fx) + v(1, 0, 0) * fx;
  const double c01 = v(0, 0, 1) * (1 - fx) + v(1, 0, 1) * fx;
  const double c10 = v(0, 1, 0) * (1 - fx) + v(1, 1, 0) * fx;
  const double c11 = v(0, 1, 1) * (1 - fx) + v(1, 1, 1) * fx;
  const double c0 = c00 * (1 - fy) + c10 * fy;
  const double c1 = c01 * (1 - fy) + c11 * fy;
  return c0 * (1 - fz) + c1 * fz;
}

StackedSdf stack_preshapes(std::vector<SdfGrid> sdfs, double epsilon) {
  require(!sdfs.empty(), "stack_preshapes: need at least one grid");
  require(epsilon > 0.0, "stack_preshapes: epsilon must be positive");
  double max_diagonal = 0.0;
  for (const SdfGrid& g : sdfs)
    max_diagonal = std::max(max_diagonal, (g.max_corner() - g.origin).norm());
  StackedSdf stacked;
  stacked.epsilon = epsilon;
  stacked.offsets.reserve(sdfs.size());
  for (std::size_t i = 0; i < sdfs.size(); ++i)
    stacked.offsets.push_back(Vec3(static_cast<double>(i) * (max_diagonal + epsilon), 0.0, 0.0));
  stacked.grids = std::move(sdfs);
  return stacked;
}

double query(const StackedSdf& stacked, std::size_t preshape, const Vec3& p) {
  require(preshape < stacked.grids.size(), "query: preshape index out of range");
  // Stacked-space point → grid frame: preshape i's field is laid out around
  // +offset_i, while the grid itself is stored in its build frame.
  return query(stacked.grids[preshape], p - stacked.offsets[preshape]);
}

std::pair<PointCloud, std::size_t> colliding_points(const StackedSdf& stacked,
                                                    std::size_t preshape,
                                                    const PointCloud& scene,
                                                    const PoseParams& theta,
                                                    double contact_tolerance) {
  require(preshape < stacked.grids.size(), "colliding_points: preshape index out of range");
  const PoseParams inv = inverse(theta);
  const Mat3 r = rotation_matrix(inv.q);
  const Vec3 offset = stacked.offsets[preshape];
  PointCloud hits;
  for (const Vec3& p : scene) {
    const Vec3 local = r * p + inv.t + offset;
    if (query(stacked, preshape, local) > contact_tolerance) hits.push_back(p);
  }
  const std::size_t count = hits.size();
  return {std::move(hits), count};
}

namespace {
template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_pod(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}
constexpr char kMagic[8] = {'G', 'M', 'S', 'D', 'F', '0', '0', '1'};
}  // namespace

void save_sdf(const SdfGrid& sdf, std::ostream& out) {
  out.write(kMagic, sizeof(kMagic));
  for (int a = 0; a < 3; ++a) write_pod(out, sdf.origin[a]);
  write_pod(out, sdf.voxel);
  for (int a = 0; a < 3; ++a) write_pod(out, sdf.dims[a]);
  write_pod(out, sdf.boundary_max_abs);
  out.write(reinterpret_cast<const char*>(sdf.values.data()),
            static_cast<std::streamsize>(sdf.values.size() * sizeof(float)));
}

SdfGrid load_sdf(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  require(in.good() && std::equal(magic, magic + 8, kMagic), "load_sdf: bad header");
  SdfGrid sdf;
  for (int a = 0; a < 3; ++a) sdf.origin[a] = read_pod<double>(in);
  sdf.voxel = read_pod<double>(in);
  for (int a = 0; a < 3; ++a) sdf.dims[a] = read_pod<std::int32_t>(in);
  sdf.boundary_max_abs = read_pod<double>(in);
  const std::size_t total =
      static_cast<std::size_t>(sdf.dims[0]) * sdf.dims[1] * sdf.dims[2];
  sdf.values.resize(total);
  in.read(reinterpret_cast<char*>(sdf.values.data()),
          static_cast<std::streamsize>(total * sizeof(float)));
  require(in.good(), "load_sdf: truncated payload");
  return sdf;
}

}  // namespace graspmatch
