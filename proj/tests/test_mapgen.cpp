#include <gtest/gtest.h>

#include <random>

#include "support/fd.hpp"
#include "topoloc/error.hpp"
#include "topoloc/mapgen.hpp"
#include "topoloc/sim.hpp"

using namespace topoloc;
using topoloc::testing::random_vec;

namespace {

const CameraIntrinsics kIntr{400.0, 400.0, 320.0, 240.0, 640, 480};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::InvalidConfig;
}

double rot_err(const Pose& a, const Pose& b) { return so3_log(a.rotation.inverse() * b.rotation).norm(); }

/// Points seen by a camera with extrinsic `world_to_cam`, features optionally noisy.
Matched3D2D pnp_points(std::mt19937_64& rng, const Pose& world_to_cam, int n, double noise_px = 0.0,
                       bool planar = false) {
  std::uniform_real_distribution<double> z(4.0, 30.0), u(10, 630), v(10, 470);
  std::normal_distribution<double> noise(0, noise_px);
  const Pose cam_to_world = world_to_cam.inverse();
  Matched3D2D m;
  for (int i = 0; i < n; ++i) {
    const ImagePoint f{u(rng), v(rng)};
    Vec3 p;
    if (planar) {
      // Points on the plane z_cam = 10 - 0.2 x_cam.
      const Vec3 ray((f.u - kIntr.cx) / kIntr.fx, (f.v - kIntr.cy) / kIntr.fy, 1.0);
      p = ray * (10.0 / (1.0 + 0.2 * ray.x()));
    } else {
      p = unproject(kIntr, f, z(rng));
    }
    m.matches.push_back({cam_to_world * p, {f.u + noise(rng), f.v + noise(rng)}});
  }
  return m;
}

class NoMatches : public Matcher {
 public:
  CorrespondenceSet match(const MatchView&, const MatchView&) override { return {}; }
};

}  // namespace

TEST(Rasterize, SinglePointOnAxis) {
  const PointCloud cloud{{Vec3(0, 0, 5), 99}};
  const Raster r = rasterize(cloud, Pose::identity(), kIntr);
  int valid = 0;
  for (float d : r.depth.data()) valid += valid_depth(d) ? 1 : 0;
  EXPECT_EQ(valid, 1);
  EXPECT_FLOAT_EQ(r.depth.at(320, 240), 5.0f);
  EXPECT_EQ(r.intensity.at(320, 240), 99);
}

TEST(Rasterize, ZBufferKeepsNearest) {
  const PointCloud cloud{{Vec3(0, 0, 6), 10}, {Vec3(0, 0, 4), 20}, {Vec3(0, 0, 8), 30}};
  const Raster r = rasterize(cloud, Pose::identity(), kIntr);
  EXPECT_FLOAT_EQ(r.depth.at(320, 240), 4.0f);
  EXPECT_EQ(r.intensity.at(320, 240), 20);
}

TEST(Rasterize, CullsBehindOutOfRangeAndOutsideImage) {
  const PointCloud cloud{{Vec3(0, 0, -5), 1}, {Vec3(0, 0, 500), 1}, {Vec3(100, 0, 1), 1}};
  const Raster r = rasterize(cloud, Pose::identity(), kIntr);
  for (float d : r.depth.data()) EXPECT_FALSE(valid_depth(d));
  EXPECT_EQ(code_of([&] { rasterize({}, Pose::identity(), kIntr); }), ErrorCode::EmptyCloud);
}

TEST(Rasterize, UsesCameraPose) {
  const Pose cam{so3_exp(Vec3(0, 0.4, 0)), Vec3(3, -1, 2)};
  const Vec3 p_cam(0.5, -0.25, 7.0);
  const Raster r = rasterize({{cam * p_cam, 5}}, cam, kIntr);
  const ImagePoint f = project(kIntr, p_cam);
  const PixelIndex px = nearest_pixel(f.u, f.v);
  EXPECT_NEAR(r.depth.at(px.x, px.y), 7.0f, 1e-5);
}

TEST(RotationRansac, PureRotationKeepsAll) {
  std::mt19937_64 rng(1);
  const Rotation rot = so3_exp(Vec3(0.05, -0.1, 0.02));
  Matched3D2D m = pnp_points(rng, Pose{rot, Vec3::Zero()}, 60);
  const Matched3D2D out = rotation_ransac(m, kIntr);
  EXPECT_EQ(out.size(), 60u);
  EXPECT_EQ(out.dropped, 0);
}

TEST(RotationRansac, RejectsGrossOutliers) {
  std::mt19937_64 rng(2);
  const Pose truth{so3_exp(Vec3(0.02, 0.03, -0.01)), Vec3::Zero()};
  Matched3D2D m = pnp_points(rng, truth, 80, 0.3);
  std::uniform_real_distribution<double> u(0, 639), v(0, 479);
  std::vector<bool> gross(80, false);
  for (int i = 0; i < 20; ++i) {
    const Vec3 p = m.matches[static_cast<size_t>(i)].point * 1.1 + Vec3(0.1, 0, 0);
    const ImagePoint f{u(rng), v(rng)};
    gross.push_back((project(kIntr, truth * p).vec() - f.vec()).norm() > 3.0);
    m.matches.push_back({p, f});
  }
  const Matched3D2D out = rotation_ransac(m, kIntr);
  int consistent = 0, wild = 0;
  for (const auto& pf : out.matches) {
    for (size_t i = 0; i < m.size(); ++i) {
      if (m.matches[i].point == pf.point && m.matches[i].feature.u == pf.feature.u) {
        (gross[i] ? wild : consistent) += 1;
      }
    }
  }
  EXPECT_GE(consistent, 76);
  EXPECT_EQ(wild, 0);
}

TEST(RotationRansac, GuardsAgainstTooFewAndNoConsensus) {
  Matched3D2D one;
  one.matches.push_back({Vec3(0, 0, 5), {320, 240}});
  EXPECT_EQ(code_of([&] { rotation_ransac(one, kIntr); }), ErrorCode::TooFewMatches);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 639), v(0, 479);
  Matched3D2D noise;
  for (int i = 0; i < 50; ++i) noise.matches.push_back({random_vec(rng, 10) + Vec3(0, 0, 20), {u(rng), v(rng)}});
  RansacOptions o;
  o.min_inlier_ratio = 0.9;
  EXPECT_EQ(code_of([&] { rotation_ransac(noise, kIntr, o); }), ErrorCode::NoConsensus);
}

TEST(Pnp, IdentityFromCameraFramePoints) {
  std::mt19937_64 rng(4);
  const PnpResult r = solve_pnp(pnp_points(rng, Pose::identity(), 30), kIntr);
  EXPECT_LT(r.transform.translation.norm(), 1e-8);
  EXPECT_LT(so3_log(r.transform.rotation).norm(), 1e-8);
}

TEST(Pnp, RecoversRandomPoseExactly) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Pose truth{so3_exp(random_vec(rng, 1.5)), random_vec(rng, 30)};
    const PnpResult r = solve_pnp(pnp_points(rng, truth, 100), kIntr);
    EXPECT_LT((r.transform.translation - truth.translation).norm(), 1e-6);
    EXPECT_LT(rot_err(r.transform, truth), 1e-7);
    EXPECT_LT(r.rms_px, 1e-6);
  }
}

TEST(Pnp, PlanarPointsUseHomographyInit) {
  std::mt19937_64 rng(6);
  const Pose truth{so3_exp(Vec3(0.1, -0.3, 0.2)), Vec3(1, 2, -3)};
  const PnpResult r = solve_pnp(pnp_points(rng, truth, 40, 0.0, true), kIntr);
  EXPECT_LT((r.transform.translation - truth.translation).norm(), 1e-6);
  EXPECT_LT(rot_err(r.transform, truth), 1e-7);
}

TEST(Pnp, RmsHistoryNeverIncreases) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Pose truth{so3_exp(random_vec(rng, 1.0)), random_vec(rng, 10)};
    const PnpResult r = solve_pnp(pnp_points(rng, truth, 50, 2.0), kIntr);
    ASSERT_FALSE(r.rms_history.empty());
    for (size_t i = 1; i < r.rms_history.size(); ++i) EXPECT_LE(r.rms_history[i], r.rms_history[i - 1]);
    EXPECT_DOUBLE_EQ(r.rms_history.back(), r.rms_px);
  }
}

TEST(Pnp, NoisyRecoveryWithinTolerance) {
  std::mt19937_64 rng(8);
  std::vector<double> et;
  for (int trial = 0; trial < 100; ++trial) {
    const Pose truth{so3_exp(random_vec(rng, 1.0)), random_vec(rng, 20)};
    const PnpResult r = solve_pnp(pnp_points(rng, truth, 100, 0.5), kIntr);
    et.push_back((r.transform.inverse().translation - truth.inverse().translation).norm());
  }
  std::sort(et.begin(), et.end());
  EXPECT_LT(et[94], 0.02);
}

TEST(Pnp, DegenerateInputs) {
  Matched3D2D three;
  for (int i = 0; i < 3; ++i) three.matches.push_back({Vec3(i, 1, 5), {100.0 + i, 100}});
  EXPECT_EQ(code_of([&] { solve_pnp(three, kIntr); }), ErrorCode::DegenerateConfiguration);

  Matched3D2D line;
  for (int i = 0; i < 10; ++i) line.matches.push_back({Vec3(0.1 * i, 0, 5 + i), project(kIntr, Vec3(0.1 * i, 0, 5 + i))});
  EXPECT_EQ(code_of([&] { solve_pnp(line, kIntr); }), ErrorCode::DegenerateConfiguration);
}

TEST(Pnp, InitialGuessOverloadWorksWithThreePoints) {
  std::mt19937_64 rng(9);
  const Pose truth{so3_exp(Vec3(0.1, 0.05, -0.02)), Vec3(0.2, -0.1, 0.3)};
  const Matched3D2D m = pnp_points(rng, truth, 3);
  const Pose guess{truth.rotation * so3_exp(Vec3(0.01, -0.01, 0.005)), truth.translation + Vec3(0.05, 0.05, -0.05)};
  const PnpResult r = solve_pnp(m, kIntr, guess);
  EXPECT_LT(r.rms_px, 1e-6);
}

TEST(RefineNodePose, Examples) {
  const Pose predicted{so3_exp(Vec3(0.1, 0.2, 0.3)), Vec3(1, 2, 3)};
  const Pose same = refine_node_pose(predicted, Pose::identity());
  EXPECT_TRUE(same.matrix().isApprox(predicted.matrix()));
  const Pose moved = refine_node_pose(Pose::identity(), Pose{Rotation::identity(), Vec3(1, 0, 0)});
  EXPECT_TRUE(moved.translation.isApprox(Vec3(-1, 0, 0)));
  EXPECT_LT(so3_log(moved.rotation).norm(), 1e-15);
}

TEST(ChainInitialPose, Examples) {
  const Pose prev{so3_exp(Vec3(0, 0, 1.0)), Vec3(5, 5, 0)};
  OdometrySequence odo;
  odo.poses = {{0.0, Pose{so3_exp(Vec3(0.3, 0, 0)), Vec3(1, 1, 1)}}, {0.1, Pose{so3_exp(Vec3(0.3, 0, 0)), Vec3(1, 1, 1)}}};
  EXPECT_TRUE(chain_initial_pose(prev, odo, 0).matrix().isApprox(prev.matrix()));

  odo.poses = {{0.0, Pose::identity()}, {0.1, Pose{Rotation::identity(), Vec3(1, 0, 0)}}};
  const Pose next = chain_initial_pose(prev, odo, 0);
  EXPECT_TRUE(next.translation.isApprox(prev.translation + prev.rotation * Vec3(1, 0, 0)));
  EXPECT_EQ(code_of([&] { chain_initial_pose(prev, odo, 1); }), ErrorCode::MissingOdometry);
}

TEST(ChainInitialPose, ExtrinsicConjugation) {
  // The camera displacement follows the baseline displacement seen through the extrinsic.
  const Pose cam_in_base{so3_exp(Vec3(0.2, -0.1, 0.4)), Vec3(0.5, 0.1, 1.2)};
  const Pose base0{so3_exp(Vec3(0, 0, 0.3)), Vec3(2, 3, 0)};
  const Pose base1{so3_exp(Vec3(0, 0.05, 0.5)), Vec3(4, 3.5, 0.1)};
  OdometrySequence odo{{{0, base0}, {1, base1}}, cam_in_base};
  const Pose cam0 = base0 * cam_in_base;
  EXPECT_TRUE(chain_initial_pose(cam0, odo, 0).matrix().isApprox((base1 * cam_in_base).matrix(), 1e-12));
}

namespace {

struct MapgenFixture {
  sim::World world;
  std::vector<CameraFrame> frames;
  OdometrySequence odo;
};

MapgenFixture make_fixture(size_t n_frames) {
  sim::TrajectorySpec spec;
  spec.duration_s = 0.5 * static_cast<double>(n_frames) + 1.0;
  sim::CorridorGeometry geo;
  MapgenFixture f;
  f.world = sim::gen_world(spec, 12000, geo);
  const auto all = sim::make_frames(f.world, false);
  const auto idx = f.world.frame_indices();
  f.odo.camera_to_baseline = f.world.rig.extrinsics.imu_to_camera().inverse();
  for (size_t k = 0; k < all.size() && f.frames.size() < n_frames; k += 5) {
    f.frames.push_back(all[k]);
    f.odo.poses.push_back({all[k].timestamp, f.world.samples[idx[k]].pose});
  }
  return f;
}

}  // namespace

TEST(GenerateMap, PerturbedStartConverges) {
  const MapgenFixture f = make_fixture(20);
  ASSERT_EQ(f.frames.size(), 20u);
  const Pose& first = *f.frames.front().true_pose;
  const Pose init{first.rotation * so3_exp(Vec3(0.02, -0.025, 0.015)), first.translation + Vec3(0.3, -0.3, 0.26)};
  SyntheticMatchOptions mo;
  mo.sigma_px = 0.5;
  mo.outlier_fraction = 0.2;
  mo.max_range_m = 80;
  SyntheticMatcher m(f.world.landmark_positions(), f.world.rig.intrinsics, mo, 5);
  const MapGenResult res = generate_map(f.world.landmarks, f.frames, f.odo, init, f.world.rig.intrinsics, m);
  ASSERT_EQ(res.frames.size(), 20u);
  ASSERT_EQ(res.node_of_frame.size(), 20u);
  for (size_t i = 0; i < 20; ++i) {
    ASSERT_TRUE(res.frames[i].accepted) << res.frames[i].failure;
    const Pose& p = res.map.node(res.node_of_frame[i]).pose;
    EXPECT_LT((p.translation - f.frames[i].true_pose->translation).norm(), 0.02);
    EXPECT_LT(rot_err(p, *f.frames[i].true_pose), 0.005);
    EXPECT_EQ(res.map.node(res.node_of_frame[i]).timestamp, f.frames[i].timestamp);
  }
}

TEST(GenerateMap, ExactStartAndMatcherReproducesTruth) {
  const MapgenFixture f = make_fixture(3);
  SyntheticMatchOptions mo;
  mo.max_range_m = 80;
  SyntheticMatcher m(f.world.landmark_positions(), f.world.rig.intrinsics, mo, 5);
  const MapGenResult res =
      generate_map(f.world.landmarks, f.frames, f.odo, *f.frames[0].true_pose, f.world.rig.intrinsics, m);
  ASSERT_TRUE(res.frames[0].accepted);
  const Pose& p = res.map.node(0).pose;
  EXPECT_LT((p.translation - f.frames[0].true_pose->translation).norm(), 1e-6);
  EXPECT_LT(rot_err(p, *f.frames[0].true_pose), 1e-7);
}

TEST(GenerateMap, MatcherWithoutMatchesYieldsEmptyMap) {
  const MapgenFixture f = make_fixture(4);
  NoMatches m;
  const MapGenResult res =
      generate_map(f.world.landmarks, f.frames, f.odo, *f.frames[0].true_pose, f.world.rig.intrinsics, m);
  EXPECT_TRUE(res.map.empty());
  ASSERT_EQ(res.frames.size(), 4u);
  for (const auto& r : res.frames) {
    EXPECT_FALSE(r.accepted);
    EXPECT_FALSE(r.failure.empty());
  }
  for (int id : res.node_of_frame) EXPECT_EQ(id, -1);
}

TEST(GenerateMap, EmptyCloudThrows) {
  const MapgenFixture f = make_fixture(2);
  NoMatches m;
  EXPECT_EQ(code_of([&] { generate_map({}, f.frames, f.odo, Pose::identity(), kIntr, m); }), ErrorCode::EmptyCloud);
}
