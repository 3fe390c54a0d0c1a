#pragma once

#include "graspmatch/rng.hpp"
#include "graspmatch/types.hpp"

#include <memory>

namespace graspmatch {

/// Result of a nearest-neighbor query.
struct NearestResult {
  Vec3 point;
  std::size_t index;  // position in the indexed cloud
  double distance;
};

/// Exact nearest-neighbor index (kd-tree) over an immutable snapshot of a
/// point cloud. Ties are broken deterministically by the lowest point index,
/// so queries always match an exhaustive scan exactly.
class NnIndex {
 public:
  explicit NnIndex(const PointCloud& cloud);
  ~NnIndex();
  NnIndex(NnIndex&&) noexcept;
  NnIndex& operator=(NnIndex&&) noexcept;
  NnIndex(const NnIndex&) = delete;
  NnIndex& operator=(const NnIndex&) = delete;

  NearestResult nearest(const Vec3& query) const;
  std::size_t size() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Builds an exact index over the given points; the cloud is copied.
NnIndex build_index(const PointCloud& cloud);

/// m distinct points sampled uniformly without replacement, in sample order.
/// Deterministic for a fixed rng state.
PointCloud sample_minibatch(const PointCloud& cloud, std::size_t m, Rng& rng);

/// Index variant of sample_minibatch (same draw sequence).
std::vector<std::size_t> sample_minibatch_indices(std::size_t cloud_size, std::size_t m, Rng& rng);

/// Mini-batch ramp m(k) = round(n_ref · min(k, 2k_max/3) / (2k_max/3)),
/// clamped to [1, n_ref]. Saturates at n_ref for k ≥ 2k_max/3.
std::size_t minibatch_schedule(std::size_t k, std::size_t k_max, std::size_t n_ref);

}  // namespace graspmatch
