#include "graspmatch/rng.hpp"
#include "graspmatch/spatial_index.hpp"
#include "graspmatch/types.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "helpers.hpp"

using namespace graspmatch;
using testutil::random_vec3;

namespace {

// Exhaustive scan with strict-< comparison in ascending index order: the
// reference the tree must match exactly, including tie-breaks.
NearestResult brute_nearest(const PointCloud& cloud, const Vec3& query) {
  NearestResult best{cloud[0], 0, (cloud[0] - query).norm()};
  for (std::size_t i = 1; i < cloud.size(); ++i) {
    const double d = (cloud[i] - query).norm();
    if (d < best.distance) best = NearestResult{cloud[i], i, d};
  }
  return best;
}

}  // namespace

TEST_CASE("build_index rejects empty clouds and handles tiny ones") {
  CHECK_THROWS_AS(build_index(PointCloud{}), InvalidArgument);

  const PointCloud one{Vec3(0.1, 0.2, 0.3)};
  const NnIndex index = build_index(one);
  CHECK(index.size() == 1);
  const NearestResult r = index.nearest(Vec3(1.1, 0.2, 0.3));
  CHECK(r.index == 0);
  CHECK((r.point - one[0]).norm() == 0.0);
  CHECK(r.distance == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("build_index keeps duplicate points and reports the lowest index") {
  const PointCloud dupes(5, Vec3(0.5, 0.5, 0.5));
  const NnIndex index = build_index(dupes);
  CHECK(index.size() == 5);
  const NearestResult r = index.nearest(Vec3(0.4, 0.5, 0.5));
  CHECK(r.index == 0);
}

TEST_CASE("nearest returns zero distance at an indexed point") {
  Rng rng(201);
  PointCloud cloud;
  for (int i = 0; i < 64; ++i) cloud.push_back(random_vec3(rng, 0.5));
  const NnIndex index = build_index(cloud);
  for (std::size_t i = 0; i < cloud.size(); i += 7) {
    const NearestResult r = index.nearest(cloud[i]);
    CHECK(r.distance == 0.0);
    CHECK((r.point - cloud[i]).norm() == 0.0);
  }
}

TEST_CASE("nearest breaks exact ties by the lower point index") {
  const PointCloud pair{Vec3(-1.0, 0.0, 0.0), Vec3(1.0, 0.0, 0.0)};
  CHECK(build_index(pair).nearest(Vec3(0.0, 0.0, 0.0)).index == 0);

  // The same query against the reversed cloud must pick the new index 0.
  const PointCloud reversed{Vec3(1.0, 0.0, 0.0), Vec3(-1.0, 0.0, 0.0)};
  CHECK(build_index(reversed).nearest(Vec3(0.0, 0.0, 0.0)).index == 0);

  // Eight corners of a cube are all equidistant from its center.
  PointCloud corners;
  for (int x : {-1, 1})
    for (int y : {-1, 1})
      for (int z : {-1, 1}) corners.push_back(Vec3(x, y, z));
  CHECK(build_index(corners).nearest(Vec3(0.0, 0.0, 0.0)).index == 0);
}

TEST_CASE("nearest matches an exhaustive scan over random data") {
  Rng rng(202);
  PointCloud cloud;
  for (int i = 0; i < 500; ++i) cloud.push_back(random_vec3(rng, 1.0));
  // Inject duplicates so tie-breaking is exercised.
  for (int i = 0; i < 20; ++i) cloud.push_back(cloud[static_cast<std::size_t>(i) * 3]);
  const NnIndex index = build_index(cloud);

  for (int trial = 0; trial < 200; ++trial) {
    Vec3 query = random_vec3(rng, 1.2);
    if (trial % 4 == 0) query = cloud[rng.uniform_index(cloud.size())];  // exact hits
    const NearestResult got = index.nearest(query);
    const NearestResult want = brute_nearest(cloud, query);
    CHECK(got.index == want.index);
    CHECK((got.point - want.point).norm() == 0.0);
    CHECK(std::abs(got.distance - want.distance) <= 1e-12);
  }
}

TEST_CASE("sample_minibatch draws distinct in-range points") {
  Rng rng(203);
  PointCloud cloud;
  for (int i = 0; i < 40; ++i) cloud.push_back(Vec3(i, 0.0, 0.0));

  SUBCASE("m equal to the cloud size is a permutation") {
    auto idx_rng = Rng(7);
    const auto indices = sample_minibatch_indices(cloud.size(), cloud.size(), idx_rng);
    REQUIRE(indices.size() == cloud.size());
    std::vector<std::size_t> sorted = indices;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);
  }

  SUBCASE("m = 1 returns a member of the cloud") {
    const PointCloud batch = sample_minibatch(cloud, 1, rng);
    REQUIRE(batch.size() == 1);
    int hits = 0;
    for (const Vec3& p : cloud) hits += (p - batch[0]).norm() == 0.0 ? 1 : 0;
    CHECK(hits == 1);
  }

  SUBCASE("indices are distinct for any m") {
    for (std::size_t m : {2ul, 17ul, 39ul}) {
      auto local = Rng(m);
      const auto indices = sample_minibatch_indices(cloud.size(), m, local);
      REQUIRE(indices.size() == m);
      const std::set<std::size_t> unique(indices.begin(), indices.end());
      CHECK(unique.size() == m);
      for (std::size_t i : indices) CHECK(i < cloud.size());
    }
  }

  SUBCASE("a fixed seed reproduces the same batch") {
    auto rng_a = Rng(99);
    auto rng_b = Rng(99);
    const auto a = sample_minibatch_indices(cloud.size(), 10, rng_a);
    const auto b = sample_minibatch_indices(cloud.size(), 10, rng_b);
    CHECK(a == b);
    // The point variant draws the same sequence.
    auto rng_c = Rng(99);
    const PointCloud points = sample_minibatch(cloud, 10, rng_c);
    REQUIRE(points.size() == a.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK((points[i] - cloud[a[i]]).norm() == 0.0);
  }

  SUBCASE("out-of-range m is rejected") {
    auto local = Rng(1);
    CHECK_THROWS_AS(sample_minibatch(cloud, 0, local), InvalidArgument);
    CHECK_THROWS_AS(sample_minibatch(cloud, cloud.size() + 1, local), InvalidArgument);
    CHECK_THROWS_AS(sample_minibatch_indices(cloud.size(), 0, local), InvalidArgument);
  }
}

TEST_CASE("minibatch_schedule ramps linearly and saturates at two thirds") {
  CHECK(minibatch_schedule(0, 40, 900) == 1);  // clamped to at least one sample

  // Saturation: every iteration at or past ceil(2/3 * k_max) uses the full
  // reference batch.
  for (std::size_t k = 27; k <= 40; ++k) CHECK(minibatch_schedule(k, 40, 900) == 900);

  // One third of the way through, about half the reference batch: the exact
  // value is round(900 * 13 / (80/3)) = 439.
  CHECK(minibatch_schedule(13, 40, 900) == 439);
  CHECK(std::abs(static_cast<long>(minibatch_schedule(13, 40, 900)) - 450L) <= 15);

  SUBCASE("non-decreasing in k and always within bounds") {
    for (std::size_t k_max : {1ul, 7ul, 40ul, 100ul}) {
      for (std::size_t n_ref : {1ul, 10ul, 900ul}) {
        std::size_t prev = 0;
        for (std::size_t k = 0; k <= k_max; ++k) {
          const std::size_t m = minibatch_schedule(k, k_max, n_ref);
          CHECK(m >= 1);
          CHECK(m <= n_ref);
          CHECK(m >= prev);
          prev = m;
        }
        const auto saturation =
            static_cast<std::size_t>(std::ceil(2.0 * static_cast<double>(k_max) / 3.0));
        for (std::size_t k = saturation; k <= k_max; ++k) {
          CHECK(minibatch_schedule(k, k_max, n_ref) == n_ref);
        }
      }
    }
  }
}
