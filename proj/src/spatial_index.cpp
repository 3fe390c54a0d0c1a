#include "graspmatch/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace graspmatch {

// A classic median-split kd-tree over indices into the stored cloud. Nodes
// are laid out in an array; leaves hold small runs that are scanned linearly.
// Tie-breaking: strictly-closer wins; equal distances prefer the lower cloud
// index, which matches a brute-force scan in ascending index order.
struct NnIndex::Impl {
  struct Node {
    // Internal node: split axis/value and children; leaf: [begin, end) run.
    int axis = -1;
    double split = 0.0;
    std::int32_t left = -1, right = -1;
    std::uint32_t begin = 0, end = 0;
  };

  PointCloud points;
  std::vector<std::uint32_t> order;  // permutation of point indices
  std::vector<Node> nodes;

  static constexpr std::size_t kLeafSize = 12;

  std::int32_t build(std::size_t begin, std::size_t end) {
    Node node;
    if (end - begin <= kLeafSize) {
      node.begin = static_cast<std::uint32_t>(begin);
      node.end = static_cast<std::uint32_t>(end);
      // Ascending cloud index inside the leaf makes the equal-distance
      // tie-break fall out of the scan order.
      std::sort(order.begin() + begin, order.begin() + end);
      nodes.push_back(node);
      return static_cast<std::int32_t>(nodes.size() - 1);
    }
    Vec3 lo = points[order[begin]], hi = lo;
    for (std::size_t i = begin + 1; i < end; ++i) {
      lo = lo.cwiseMin(points[order[i]]);
      hi = hi.cwiseMax(points[order[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const std::size_t mid = (begin + end) / 2;
    std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       return points[a][axis] < points[b][axis];
                     });
    node.axis = axis;
    node.split = points[order[mid]][axis];
    nodes.push_back(node);
    const auto self = static_cast<std::int32_t>(nodes.size() - 1);
    const auto left = build(begin, mid);
    const auto right = build(mid, end);
    nodes[self].left = left;
    nodes[self].right = right;
    return self;
  }

  void search(std::int32_t node_id, const Vec3& query, double& best_d2,
              std::uint32_t& best_idx) const {
    const Node& node = nodes[node_id];
    if (node.axis < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t idx = order[i];
        const double d2 = (points[idx] - query).squaredNorm();
        if (d2 < best_d2 || (d2 == best_d2 && idx < best_idx)) {
          best_d2 = d2;
          best_idx = idx;
        }
      }
      return;
    }
    const double diff = query[node.axis] - node.split;
    const std::int32_t near = diff < 0.0 ? node.left : node.right;
    const std::int32_t far = diff < 0.0 ? node.right : node.left;
    search(near, query, best_d2, best_idx);
    // The far side can still hold an equal-distance lower index, so descend
    // on <= rather than <.
    if (diff * diff <= best_d2) search(far, query, best_d2, best_idx);
  }
};

NnIndex::NnIndex(const PointCloud& cloud) : impl_(std::make_unique<Impl>()) {
  require(!cloud.empty(), "build_index: empty cloud");
  impl_->points = cloud;
  impl_->order.resize(cloud.size());
  std::iota(impl_->order.begin(), impl_->order.end(), 0u);
  impl_->nodes.reserve(2 * cloud.size() / Impl::kLeafSize + 4);
  impl_->build(0, cloud.size());
}

NnIndex::~NnIndex() = default;
NnIndex::NnIndex(NnIndex&&) noexcept = default;
NnIndex& NnIndex::operator=(NnIndex&&) noexcept = default;

NearestResult NnIndex::nearest(const Vec3& query) const {
  double best_d2 = std::numeric_limits<double>::infinity();
  std::uint32_t best_idx = std::numeric_limits<std::uint32_t>::max();
  impl_->search(0, query, best_d2, best_idx);
  return NearestResult{impl_->points[best_idx], best_idx, std::sqrt(best_d2)};
}

std::size_t NnIndex::size() const { return impl_->points.size(); }

NnIndex build_index(const PointCloud& cloud) { return NnIndex(cloud); }

std::vector<std::size_t> sample_minibatch_indices(std::size_t cloud_size, std::size_t m,
                                                  Rng& rng) {
  require(m >= 1 && m <= cloud_size, "sample_minibatch: m out of range");
  // Partial Fisher-Yates over an index array: m draws, without replacement.
  std::vector<std::size_t> idx(cloud_size);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(cloud_size - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(m);
  return idx;
}

PointCloud sample_minibatch(const PointCloud& cloud, std::size_t m, Rng& rng) {
  const auto idx = sample_minibatch_indices(cloud.size(), m, rng);
  PointCloud batch;
  batch.reserve(m);
  for (std::size_t i : idx) batch.push_back(cloud[i]);
  return batch;
}

std::size_t minibatch_schedule(std::size_t k, std::size_t k_max, std::size_t n_ref) {
  const double saturation = 2.0 * static_cast<double>(k_max) / 3.0;
  const double ramp = std::min(static_cast<double>(k), saturation) / saturation;
  const auto m = static_cast<std::int64_t>(std::llround(static_cast<double>(n_ref) * ramp));
  return static_cast<std::size_t>(
      std::clamp<std::int64_t>(m, 1, static_cast<std::int64_t>(n_ref)));
}

}  // namespace graspmatch
