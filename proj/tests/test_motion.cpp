#include <doctest.h>

#include <cmath>
#include <random>

#include "emotive/events.hpp"
#include "emotive/motion.hpp"

using namespace emotive;

namespace {

// Degree-1 rational curve reproducing the pixel path of a point approaching
// the camera: displacement d(t) = x(t) - x(0) with x(t) = fx*X/(Z0 + Vz*t).
// For X=1, Z0=10, Vz=-2, fx=1 this is d(t) = t/(50 - 10t), met exactly by
// weights (1, 0.8) and end control 0.025.
Trajectory approach_trajectory(std::size_t h, std::size_t w, bool along_y = false) {
  KnotVector kv = clamped_knots(2, 1, {});
  Tensor ctrl({2, h, w, 2});
  for (std::size_t i = 0; i < h * w; ++i) {
    ctrl[(h * w + i) * 2 + (along_y ? 1 : 0)] = 0.025;
  }
  return Trajectory(kv, {1.0, 0.8}, std::move(ctrl));
}

Trajectory linear_trajectory(std::size_t h, std::size_t w, double ux, double vy) {
  KnotVector kv = clamped_knots(4, 3, {});
  Tensor ctrl({4, h, w, 2});
  for (std::size_t i = 1; i < 4; ++i)
    for (std::size_t px = 0; px < h * w; ++px) {
      ctrl[(i * h * w + px) * 2] = ux * static_cast<double>(i) / 3.0;
      ctrl[(i * h * w + px) * 2 + 1] = vy * static_cast<double>(i) / 3.0;
    }
  return Trajectory(kv, {1, 1, 1, 1}, std::move(ctrl));
}

}  // namespace

TEST_CASE("optical flow basics") {
  auto traj = linear_trajectory(4, 4, 3.0, 0.0);
  auto f0 = optical_flow(traj, 0.0);
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(f0.u[i] == 0.0);
    CHECK(f0.v[i] == 0.0);
  }
  auto f1 = optical_flow(traj, 1.0);
  for (std::size_t i = 0; i < 16; ++i) CHECK(f1.u[i] == doctest::Approx(3.0).epsilon(1e-12));

  SUBCASE("flow is continuous along the curve parameter") {
    double prev = 0.0;
    for (int k = 0; k <= 100; ++k) {
      double t = k / 100.0;
      auto f = optical_flow(traj, t);
      CHECK(std::abs(f.u[0] - 3.0 * t) <= 1e-12);
      CHECK(f.u[0] >= prev - 1e-12);
      prev = f.u[0];
    }
  }
}

TEST_CASE("optical flow upsampling is corner-aligned bilinear") {
  KnotVector kv = clamped_knots(2, 1, {});
  Tensor ctrl({2, 2, 2, 2});
  // End displacements form a ramp: (0,0)->0, (0,1)->2, (1,0)->4, (1,1)->6.
  ctrl[(4 + 0) * 2] = 0.0;
  ctrl[(4 + 1) * 2] = 2.0;
  ctrl[(4 + 2) * 2] = 4.0;
  ctrl[(4 + 3) * 2] = 6.0;
  Trajectory traj(kv, {1.0, 1.0}, std::move(ctrl));
  auto f = optical_flow(traj, 1.0, 3, 3);
  CHECK(f.u[0] == doctest::Approx(0.0));
  CHECK(f.u[2] == doctest::Approx(2.0));
  CHECK(f.u[6] == doctest::Approx(4.0));
  CHECK(f.u[8] == doctest::Approx(6.0));
  CHECK(f.u[4] == doctest::Approx(3.0));  // center averages all four corners
}

TEST_CASE("single-view depth ratio") {
  SUBCASE("constant image velocity means no depth change") {
    auto traj = linear_trajectory(3, 3, 2.0, -1.0);
    auto m = motion_in_depth_single(traj, 1.0);
    for (std::size_t i = 0; i < 9; ++i) {
      CHECK(m.m[i] == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(m.valid[i] == 1);
    }
  }
  SUBCASE("approaching point recovers Z1/Z0 = 0.8") {
    auto traj = approach_trajectory(2, 2);
    auto m = motion_in_depth_single(traj, 1.0);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(std::abs(m.m[i] - 0.8) <= 1e-9);
      CHECK(m.valid[i] == 1);
    }
  }
  SUBCASE("motion purely along y falls back to the y axis") {
    auto traj = approach_trajectory(2, 2, true);
    auto m = motion_in_depth_single(traj, 1.0);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(m.m[i] - 0.8) <= 1e-9);
  }
  SUBCASE("x and y routes agree when both axes move") {
    // Point (1, 0.5, 10) approaching with Vz=-2: both projected axes follow
    // the same rational time law, so either axis must recover 0.8.
    KnotVector kv = clamped_knots(2, 1, {});
    Tensor both({2, 1, 1, 2});
    both[2] = 0.025;
    both[3] = 0.0125;
    auto m_both = motion_in_depth_single(Trajectory(kv, {1.0, 0.8}, std::move(both)), 1.0);
    Tensor only_y({2, 1, 1, 2});
    only_y[3] = 0.0125;
    auto m_y = motion_in_depth_single(Trajectory(kv, {1.0, 0.8}, std::move(only_y)), 1.0);
    CHECK(std::abs(m_both.m[0] - 0.8) <= 1e-12);
    CHECK(std::abs(m_y.m[0] - m_both.m[0]) <= 1e-12);
  }
  SUBCASE("static pixels are reported invalid with ratio 1") {
    auto traj = linear_trajectory(2, 2, 0.0, 0.0);
    auto m = motion_in_depth_single(traj, 1.0);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(m.m[i] == 1.0);
      CHECK(m.valid[i] == 0);
    }
  }
  SUBCASE("time bounds") {
    auto traj = approach_trajectory(1, 1);
    CHECK_THROWS_AS(motion_in_depth_single(traj, 0.0), Error);
    CHECK_THROWS_AS(motion_in_depth_single(traj, 1.5), Error);
  }
}

TEST_CASE("multi-view transport and aggregation") {
  CHECK(transport_mid(0.9, 0.5, 1.0) == doctest::Approx(0.8).epsilon(1e-14));

  SUBCASE("transport is consistent across intermediate times") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> um(0.2, 3.0), ut(0.05, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
      double m = um(rng);
      double t1 = ut(rng), t2 = ut(rng), t3 = ut(rng);
      double direct = transport_mid(m, t1, t3);
      double stepped = transport_mid(transport_mid(m, t1, t2), t2, t3);
      CHECK(std::abs(direct - stepped) <= 1e-12);
    }
  }

  SUBCASE("all static views stay static") {
    auto traj = linear_trajectory(2, 2, 1.0, 0.0);
    std::vector<double> ts{0.25, 0.5, 0.75, 1.0};
    auto m = motion_in_depth_multiview(traj, ts);
    for (std::size_t i = 0; i < 4; ++i) CHECK(m.m[i] == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("one timestamp reproduces the single view bit-exactly") {
    auto traj = approach_trajectory(3, 3);
    std::vector<double> ts{0.7};
    auto multi = motion_in_depth_multiview(traj, ts);
    auto single = motion_in_depth_single(traj, 0.7);
    for (std::size_t i = 0; i < 9; ++i) {
      CHECK(multi.m[i] == single.m[i]);
      CHECK(multi.valid[i] == single.valid[i]);
    }
  }

  SUBCASE("four views agree with the analytic ratio") {
    auto traj = approach_trajectory(2, 2);
    std::vector<double> ts{0.25, 0.5, 0.75, 1.0};
    auto m = motion_in_depth_multiview(traj, ts);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(m.m[i] - 0.8) <= 1e-9);
  }

  SUBCASE("validation") {
    auto traj = approach_trajectory(1, 1);
    std::vector<double> none;
    CHECK_THROWS_AS(motion_in_depth_multiview(traj, none), Error);
    std::vector<double> unsorted{0.5, 0.25};
    CHECK_THROWS_AS(motion_in_depth_multiview(traj, unsorted), Error);
  }
}

TEST_CASE("normalized scene flow hand values") {
  CameraIntrinsics k{10, 10, 4, 4};
  auto flow = FlowField::zeros(8, 8);
  auto mid = MiDField::ones(8, 8);

  auto s = normalized_scene_flow(flow, mid, k);
  for (double v : s.s) CHECK(v == 0.0);

  for (std::size_t i = 0; i < 64; ++i) flow.u[i] = 1.0;
  s = normalized_scene_flow(flow, mid, k);
  for (std::size_t i = 0; i < 64; ++i) {
    CHECK(s.s[3 * i] == 1.0);
    CHECK(s.s[3 * i + 1] == 0.0);
    CHECK(s.s[3 * i + 2] == 0.0);
  }

  for (std::size_t i = 0; i < 64; ++i) {
    flow.u[i] = 0.0;
    mid.m[i] = 2.0;
  }
  s = normalized_scene_flow(flow, mid, k);
  std::size_t px = 7 * 8 + 5;  // pixel (x=5, y=7)
  CHECK(s.s[3 * px] == 5.0);
  CHECK(s.s[3 * px + 1] == 7.0);
  CHECK(s.s[3 * px + 2] == 1.0);

  auto bad = FlowField::zeros(4, 4);
  CHECK_THROWS_AS(normalized_scene_flow(bad, mid, k), Error);
}

TEST_CASE("scene flow equals the direct intrinsic route on a rigid scene") {
  // Points placed so the reference projection lands exactly on pixel centers.
  RigidSceneConfig cfg;
  cfg.intrinsics = {10, 10, 8, 8};
  cfg.height = cfg.width = 16;
  cfg.duration = 1.0;
  cfg.vx = 0.4;
  cfg.vy = -0.2;
  cfg.vz = 0.5;
  for (int px = 3; px <= 13; px += 5)
    for (int py = 4; py <= 14; py += 5) {
      double z = 2.0 + 0.25 * px;
      cfg.points.push_back({(px - 8.0) * z / 10.0, (py - 8.0) * z / 10.0, z});
    }
  GroundTruth truth(cfg);

  auto flow = FlowField::zeros(16, 16, false);
  auto mid = MiDField::ones(16, 16, false);
  for (std::size_t i = 0; i < cfg.points.size(); ++i) {
    std::size_t x, y;
    REQUIRE(truth.start_pixel(i, x, y));
    auto f = truth.flow(i, 1.0);
    flow.u[y * 16 + x] = f.first;
    flow.v[y * 16 + x] = f.second;
    flow.valid[y * 16 + x] = 1;
    mid.m[y * 16 + x] = truth.motion_in_depth(i, 1.0);
    mid.valid[y * 16 + x] = 1;
  }

  auto s = normalized_scene_flow(flow, mid, cfg.intrinsics);
  for (std::size_t i = 0; i < cfg.points.size(); ++i) {
    std::size_t x, y;
    truth.start_pixel(i, x, y);
    const auto& p = cfg.points[i];
    double sx = cfg.vx * cfg.duration, sy = cfg.vy * cfg.duration, sz = cfg.vz * cfg.duration;
    double ex = (cfg.intrinsics.fx * sx + cfg.intrinsics.cx * sz) / p.Z;
    double ey = (cfg.intrinsics.fy * sy + cfg.intrinsics.cy * sz) / p.Z;
    double ez = sz / p.Z;
    std::size_t o = (y * 16 + x) * 3;
    CHECK(std::abs(s.s[o] - ex) <= 1e-6);
    CHECK(std::abs(s.s[o + 1] - ey) <= 1e-6);
    CHECK(std::abs(s.s[o + 2] - ez) <= 1e-6);
  }
}

TEST_CASE("depth-warp labels") {
  const std::size_t H = 12, W = 12;
  SUBCASE("identity depth and zero flow") {
    Tensor z0({H, W}, 5.0), z1({H, W}, 5.0);
    auto flow = FlowField::zeros(H, W);
    auto m = mid_label_from_depth(z0, z1, flow, 0);
    for (std::size_t i = 0; i < H * W; ++i) {
      CHECK(m.m[i] == doctest::Approx(1.0));
      CHECK(m.valid[i] == 1);
    }
  }
  SUBCASE("doubled depth") {
    Tensor z0({H, W}, 3.0), z1({H, W}, 6.0);
    auto flow = FlowField::zeros(H, W);
    auto m = mid_label_from_depth(z0, z1, flow, 1);
    for (std::size_t i = 0; i < H * W; ++i) CHECK(m.m[i] == doctest::Approx(2.0));
  }
  SUBCASE("fronto-parallel analytic scene matches Z(t)/Z(0)") {
    // Plane at Z0=5 moving with Vz=-1 over the window; flow is the radial
    // expansion (x-cx)(Z0/Z1 - 1).
    CameraIntrinsics k{20, 20, 6, 6};
    double Z0 = 5.0, Z1 = 4.0;
    Tensor z0({H, W}, Z0), z1({H, W}, Z1);
    auto flow = FlowField::zeros(H, W);
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        flow.u[y * W + x] = (static_cast<double>(x) - k.cx) * (Z0 / Z1 - 1.0);
        flow.v[y * W + x] = (static_cast<double>(y) - k.cy) * (Z0 / Z1 - 1.0);
      }
    auto m = mid_label_from_depth(z0, z1, flow, 0);
    std::size_t checked = 0;
    for (std::size_t i = 0; i < H * W; ++i) {
      if (!m.valid[i]) continue;
      CHECK(std::abs(m.m[i] - Z1 / Z0) <= 1e-6);
      checked++;
    }
    CHECK(checked > H * W / 2);
  }
  SUBCASE("discontinuities are masked out") {
    Tensor z0({H, W}, 5.0), z1({H, W}, 5.0);
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = W / 2; x < W; ++x) z1.at({y, x}) = 10.0;  // step edge
    auto flow = FlowField::zeros(H, W);
    auto m = mid_label_from_depth(z0, z1, flow, 1);
    CHECK(m.valid[5 * W + (W / 2)] == 0);   // on the edge
    CHECK(m.valid[5 * W + 1] == 1);         // far from it
    CHECK(m.m[5 * W + (W / 2)] == 1.0);
  }
  SUBCASE("non-positive depth rejected") {
    Tensor z0({H, W}, 5.0), z1({H, W}, 5.0);
    z1.at({3, 3}) = 0.0;
    auto flow = FlowField::zeros(H, W);
    CHECK_THROWS_AS(mid_label_from_depth(z0, z1, flow, 0), Error);
  }
}

TEST_CASE("metrics") {
  const std::size_t H = 6, W = 6;
  auto gt_flow = FlowField::zeros(H, W);
  auto gt_mid = MiDField::ones(H, W);
  std::vector<std::uint8_t> valid(H * W, 1);
  for (std::size_t i = 0; i < H * W; ++i) {
    gt_flow.u[i] = 2.0;
    gt_flow.v[i] = -1.0;
    gt_mid.m[i] = 0.9;
  }

  SUBCASE("identical fields score zero") {
    auto r = metrics(gt_flow, gt_flow, gt_mid, gt_mid, valid);
    CHECK(r.epe == 0.0);
    CHECK(r.f1 == 0.0);
    CHECK(r.logmid == 0.0);
    CHECK(r.valid_count == H * W);
  }
  SUBCASE("uniform one-pixel offset gives EPE 1") {
    auto pred = gt_flow;
    for (auto& u : pred.u) u += 1.0;
    auto r = metrics(pred, gt_flow, gt_mid, gt_mid, valid);
    CHECK(r.epe == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.f1 == 0.0);  // 1px is not an outlier
  }
  SUBCASE("log ratio error of 0.01 scores 100") {
    auto pred = gt_mid;
    for (auto& m : pred.m) m *= std::exp(0.01);
    auto r = metrics(gt_flow, gt_flow, pred, gt_mid, valid);
    CHECK(r.logmid == doctest::Approx(100.0).epsilon(1e-9));
  }
  SUBCASE("outliers need both 3px and 5 percent") {
    auto big_gt = gt_flow;
    for (auto& u : big_gt.u) u = 100.0;
    auto pred = big_gt;
    for (auto& u : pred.u) u += 4.0;  // 4 > 3px but 4 < 5% of 100
    auto r = metrics(pred, big_gt, gt_mid, gt_mid, valid);
    CHECK(r.f1 == 0.0);
    for (auto& u : pred.u) u += 2.0;  // 6px and 6% -> outlier everywhere
    r = metrics(pred, big_gt, gt_mid, gt_mid, valid);
    CHECK(r.f1 == doctest::Approx(100.0));
  }
  SUBCASE("EPE scales linearly and is permutation invariant") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    auto pred = gt_flow;
    for (std::size_t i = 0; i < H * W; ++i) pred.u[i] += u(rng);
    auto r1 = metrics(pred, gt_flow, gt_mid, gt_mid, valid);
    auto scaled_pred = gt_flow;
    for (std::size_t i = 0; i < H * W; ++i)
      scaled_pred.u[i] = gt_flow.u[i] + 3.0 * (pred.u[i] - gt_flow.u[i]);
    auto r3 = metrics(scaled_pred, gt_flow, gt_mid, gt_mid, valid);
    CHECK(r3.epe == doctest::Approx(3.0 * r1.epe).epsilon(1e-12));
  }
  SUBCASE("empty mask is an error") {
    std::vector<std::uint8_t> none(H * W, 0);
    CHECK_THROWS_AS(metrics(gt_flow, gt_flow, gt_mid, gt_mid, none), Error);
  }
}
