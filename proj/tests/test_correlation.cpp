#include <doctest.h>

#include <cmath>
#include <random>

#include "emotive/correlation.hpp"
#include "emotive/reference.hpp"

using namespace emotive;

namespace {

Tensor random_tensor(std::mt19937_64& rng, std::vector<std::size_t> shape, double lo = -1.0,
                     double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

FeatureMap xy_map(Tensor t) { return FeatureMap{std::move(t), FeatureAxis::XY, 0}; }

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("spatial correlation trivial fields") {
  FeatureMap ones = xy_map(Tensor({3, 4, 4}, 1.0));
  auto pyr = spatial_cost_pyramid(ones, ones, 2);
  REQUIRE(pyr.levels.size() == 2);
  CHECK(pyr.levels[0].shape() == std::vector<std::size_t>{4, 4, 4, 4});
  CHECK(pyr.levels[1].shape() == std::vector<std::size_t>{4, 4, 2, 2});
  for (const auto& level : pyr.levels)
    for (std::size_t i = 0; i < level.size(); ++i) CHECK(level[i] == doctest::Approx(1.0));

  FeatureMap zeros = xy_map(Tensor({3, 4, 4}, 0.0));
  auto zpyr = spatial_cost_pyramid(ones, zeros, 2);
  for (const auto& level : zpyr.levels)
    for (std::size_t i = 0; i < level.size(); ++i) CHECK(level[i] == 0.0);

  FeatureMap small = xy_map(Tensor({3, 2, 4}, 1.0));
  CHECK_THROWS_AS(spatial_cost_pyramid(ones, small, 2), Error);
}

TEST_CASE("spatial correlation matches the brute-force oracle") {
  std::mt19937_64 rng(31);
  auto fp = random_tensor(rng, {4, 8, 8});
  auto fn = random_tensor(rng, {4, 8, 8});
  auto pyr = spatial_cost_pyramid(xy_map(fp), xy_map(fn), 2);
  CHECK(max_abs_diff(pyr.levels[0], ref::spatial_cost_level(fp, fn, 1)) <= 1e-10);
  CHECK(max_abs_diff(pyr.levels[1], ref::spatial_cost_level(fp, fn, 2)) <= 1e-10);
}

TEST_CASE("spatial correlation linearity and level-0 transpose symmetry") {
  std::mt19937_64 rng(32);
  auto fp = random_tensor(rng, {3, 6, 6});
  auto fn = random_tensor(rng, {3, 6, 6});

  // A power-of-two scale keeps every product and sum exact.
  auto scaled = fp;
  for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] *= 2.0;
  auto a = spatial_cost_pyramid(xy_map(fp), xy_map(fn), 2);
  auto b = spatial_cost_pyramid(xy_map(scaled), xy_map(fn), 2);
  for (std::size_t m = 0; m < 2; ++m)
    for (std::size_t i = 0; i < a.levels[m].size(); ++i)
      CHECK(b.levels[m][i] == 2.0 * a.levels[m][i]);

  auto fwd = spatial_cost_pyramid(xy_map(fp), xy_map(fn), 1);
  auto rev = spatial_cost_pyramid(xy_map(fn), xy_map(fp), 1);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      for (std::size_t k = 0; k < 6; ++k)
        for (std::size_t l = 0; l < 6; ++l)
          CHECK(fwd.levels[0].at({i, j, k, l}) == rev.levels[0].at({k, l, i, j}));
}

TEST_CASE("pooled levels equal correlation against pre-pooled features") {
  std::mt19937_64 rng(33);
  auto fp = random_tensor(rng, {5, 8, 8});
  auto fn = random_tensor(rng, {5, 8, 8});
  auto pyr = spatial_cost_pyramid(xy_map(fp), xy_map(fn), 3);
  Tensor pooled4 = mean_pool_tail(fn, 4, 2);
  CHECK(max_abs_diff(pyr.levels[2], ref::spatial_cost_level(fp, pooled4, 1)) <= 1e-12);
}

TEST_CASE("temporal correlation basics and oracle") {
  std::mt19937_64 rng(34);
  std::vector<FeatureMap> blocks;
  for (std::size_t b = 0; b < 4; ++b)
    blocks.push_back(FeatureMap{Tensor({3, 8}, 1.0), FeatureAxis::WT, b});
  auto pyr = temporal_cost_pyramid(blocks, 2);
  REQUIRE(pyr.levels.size() == 2);
  CHECK(pyr.levels[0].shape() == std::vector<std::size_t>{3, 8, 8});
  CHECK(pyr.levels[1].shape() == std::vector<std::size_t>{3, 8, 4});
  for (const auto& lvl : pyr.levels)
    for (std::size_t i = 0; i < lvl.size(); ++i) CHECK(lvl[i] == doctest::Approx(1.0));

  SUBCASE("zero reference zeroes everything") {
    blocks[0].data = Tensor({3, 8}, 0.0);
    auto z = temporal_cost_pyramid(blocks, 2);
    for (const auto& lvl : z.levels)
      for (std::size_t i = 0; i < lvl.size(); ++i) CHECK(lvl[i] == 0.0);
  }
  SUBCASE("random blocks match the oracle") {
    for (auto& b : blocks) b.data = random_tensor(rng, {3, 8});
    auto p = temporal_cost_pyramid(blocks, 2);
    for (std::size_t n = 0; n < 3; ++n) {
      auto l0 = ref::temporal_cost_level(blocks[0].data, blocks[n + 1].data, 1);
      auto l1 = ref::temporal_cost_level(blocks[0].data, blocks[n + 1].data, 2);
      for (std::size_t i = 0; i < 8; ++i) {
        for (std::size_t j = 0; j < 8; ++j)
          CHECK(std::abs(p.levels[0].at({n, i, j}) - l0.at({i, j})) <= 1e-10);
        for (std::size_t j = 0; j < 4; ++j)
          CHECK(std::abs(p.levels[1].at({n, i, j}) - l1.at({i, j})) <= 1e-10);
      }
    }
  }
  SUBCASE("needs two blocks") {
    std::vector<FeatureMap> one = {blocks[0]};
    try {
      temporal_cost_pyramid(one, 2);
      FAIL("expected block-count error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::fewer_than_two_blocks);
    }
  }
}

TEST_CASE("tensor-product fusion") {
  std::mt19937_64 rng(35);
  CostPyramid ht, wt;
  ht.kind = CostKind::TEMPORAL_HT;
  wt.kind = CostKind::TEMPORAL_WT;
  ht.levels.push_back(random_tensor(rng, {2, 4, 4}));
  wt.levels.push_back(random_tensor(rng, {2, 5, 5}));

  auto fused = fuse_temporal(ht, wt);
  REQUIRE(fused.levels.size() == 1);
  CHECK(fused.levels[0].shape() == std::vector<std::size_t>{2, 4, 5, 4, 5});
  CHECK(max_abs_diff(fused.levels[0], ref::fuse_level(ht.levels[0], wt.levels[0])) == 0.0);

  SUBCASE("all ones stay ones; zero factor zeroes") {
    ht.levels[0] = Tensor({2, 4, 4}, 1.0);
    wt.levels[0] = Tensor({2, 5, 5}, 1.0);
    auto ones = fuse_temporal(ht, wt);
    for (std::size_t i = 0; i < ones.levels[0].size(); ++i) CHECK(ones.levels[0][i] == 1.0);
    wt.levels[0] = Tensor({2, 5, 5}, 0.0);
    auto zeros = fuse_temporal(ht, wt);
    for (std::size_t i = 0; i < zeros.levels[0].size(); ++i) CHECK(zeros.levels[0][i] == 0.0);
  }
  SUBCASE("level mismatch rejected") {
    wt.levels.push_back(random_tensor(rng, {2, 5, 2}));
    try {
      fuse_temporal(ht, wt);
      FAIL("expected level error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::level_mismatch);
    }
  }
}

TEST_CASE("neighborhood query on a spatial pyramid") {
  std::mt19937_64 rng(36);
  auto fp = random_tensor(rng, {4, 6, 6});
  auto fn = random_tensor(rng, {4, 6, 6});
  auto pyr = spatial_cost_pyramid(xy_map(fp), xy_map(fn), 2);

  SUBCASE("integer positions with r=0 read raw cells bit-exactly") {
    std::vector<PatchQuery> q(1);
    q[0].positions = Tensor({6, 6, 2});
    for (std::size_t y = 0; y < 6; ++y)
      for (std::size_t x = 0; x < 6; ++x) {
        q[0].positions[(y * 6 + x) * 2] = static_cast<double>((x * 3) % 6);
        q[0].positions[(y * 6 + x) * 2 + 1] = static_cast<double>((y * 2) % 6);
      }
    auto patch = query_neighborhood(pyr, q, 0);
    CHECK(patch.values.shape() == std::vector<std::size_t>{6, 6, 1, 2});
    for (std::size_t y = 0; y < 6; ++y)
      for (std::size_t x = 0; x < 6; ++x) {
        std::size_t qx = (x * 3) % 6, qy = (y * 2) % 6;
        CHECK(patch.values.at({y, x, 0, 0}) == pyr.levels[0].at({y, x, qy, qx}));
      }
  }

  SUBCASE("midpoint positions interpolate halfway") {
    CostPyramid tiny;
    tiny.kind = CostKind::SPATIAL;
    tiny.levels.push_back(Tensor({1, 1, 1, 2}));
    tiny.levels[0][0] = 0.0;
    tiny.levels[0][1] = 1.0;
    std::vector<PatchQuery> q(1);
    q[0].positions = Tensor({1, 1, 2});
    q[0].positions[0] = 0.5;  // x halfway between the two cells
    q[0].positions[1] = 0.0;
    auto patch = query_neighborhood(tiny, q, 0);
    CHECK(patch.values[0] == doctest::Approx(0.5).epsilon(1e-15));
  }

  SUBCASE("out-of-bounds taps read zero") {
    std::vector<PatchQuery> q(1);
    q[0].positions = Tensor({6, 6, 2});
    for (std::size_t i = 0; i < 36; ++i) {
      q[0].positions[i * 2] = -100.0;
      q[0].positions[i * 2 + 1] = 1000.0;
    }
    auto patch = query_neighborhood(pyr, q, 2);
    for (std::size_t i = 0; i < patch.values.size(); ++i) CHECK(patch.values[i] == 0.0);
  }

  SUBCASE("random subpixel positions match the dense interpolation oracle") {
    std::uniform_real_distribution<double> up(-1.5, 7.5);
    std::vector<PatchQuery> q(1);
    q[0].positions = Tensor({6, 6, 2});
    for (std::size_t i = 0; i < 72; ++i) q[0].positions[i] = up(rng);
    int radius = 1;
    auto patch = query_neighborhood(pyr, q, radius);
    for (std::size_t y = 0; y < 6; ++y)
      for (std::size_t x = 0; x < 6; ++x)
        for (std::size_t m = 0; m < 2; ++m) {
          const Tensor& lvl = pyr.levels[m];
          Tensor slab({lvl.dim(2), lvl.dim(3)});
          for (std::size_t a = 0; a < lvl.dim(2); ++a)
            for (std::size_t b = 0; b < lvl.dim(3); ++b) slab.at({a, b}) = lvl.at({y, x, a, b});
          double scale = m == 0 ? 1.0 : 0.5;
          std::size_t side = 3, taps = 9;
          for (long dy = -radius; dy <= radius; ++dy)
            for (long dx = -radius; dx <= radius; ++dx) {
              double px = q[0].positions[(y * 6 + x) * 2] * scale + static_cast<double>(dx);
              double py = q[0].positions[(y * 6 + x) * 2 + 1] * scale + static_cast<double>(dy);
              double expect = ref::bilinear_sample(slab, py, px);
              double got = patch.values.at({y, x, 0, m * taps +
                                                      static_cast<std::size_t>(dy + radius) * side +
                                                      static_cast<std::size_t>(dx + radius)});
              CHECK(std::abs(got - expect) <= 1e-10);
            }
        }
  }
}

TEST_CASE("neighborhood query on a fused temporal pyramid selects slices") {
  std::mt19937_64 rng(37);
  CostPyramid ht, wt;
  ht.kind = CostKind::TEMPORAL_HT;
  wt.kind = CostKind::TEMPORAL_WT;
  ht.levels.push_back(random_tensor(rng, {3, 4, 4}));
  wt.levels.push_back(random_tensor(rng, {3, 4, 4}));
  auto fused = fuse_temporal(ht, wt);

  std::vector<PatchQuery> q(2);
  for (std::size_t i = 0; i < 2; ++i) {
    q[i].positions = Tensor({4, 4, 2});
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 4; ++x) {
        q[i].positions[(y * 4 + x) * 2] = static_cast<double>(x);
        q[i].positions[(y * 4 + x) * 2 + 1] = static_cast<double>(y);
      }
    q[i].slice = i + 1;
  }
  auto patch = query_neighborhood(fused, q, 0);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x)
      for (std::size_t qi = 0; qi < 2; ++qi)
        CHECK(patch.values.at({y, x, qi, 0}) == fused.levels[0].at({qi + 1, y, x, y, x}));

  q[1].slice = 99;
  CHECK_THROWS_AS(query_neighborhood(fused, q, 0), Error);
}
