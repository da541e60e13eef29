#include <gtest/gtest.h>

#include <cmath>

#include "topoloc/error.hpp"
#include "topoloc/ieskf.hpp"
#include "topoloc/sim.hpp"

using namespace topoloc;
using namespace topoloc::sim;

namespace {

TrajectorySpec spec_of(Shape shape, double duration, double speed) {
  TrajectorySpec s;
  s.shape = shape;
  s.duration_s = duration;
  s.speed_mps = speed;
  return s;
}

/// Dead-reckoned final position error with noiseless synthetic IMU.
double dead_reckoning_error(double imu_rate) {
  TrajectorySpec spec = spec_of(Shape::Circle, 10.0, 10.0);
  spec.imu_rate_hz = imu_rate;
  spec.radius_m = 30.0;
  const World w = gen_world(spec, 2000, {});
  const Vec3 g(0, 0, -9.81);
  const auto imu = synthesize_imu(w, {}, g);
  FilterState s;
  s.x.rotation = w.samples.front().pose.rotation;
  s.x.position = w.samples.front().pose.translation;
  s.x.velocity = w.samples.front().velocity;
  s.x.gravity = g;
  for (size_t k = 0; k + 1 < imu.size(); ++k) s = propagate(s, imu[k], imu[k + 1].timestamp - imu[k].timestamp, {});
  return (s.x.position - w.samples.back().pose.translation).norm();
}

}  // namespace

TEST(Trajectory, StraightCoversDistanceAlongHeading) {
  const auto s = sample_trajectory(spec_of(Shape::Straight, 10.0, 10.0));
  ASSERT_EQ(s.size(), 2001u);
  const Vec3 d = s.back().pose.translation - s.front().pose.translation;
  EXPECT_NEAR(d.norm(), 100.0, 1e-9);
  EXPECT_NEAR(d.dot(s.front().pose.rotation * Vec3::UnitX()), 100.0, 1e-9);
  EXPECT_NEAR(s.back().t, 10.0, 1e-12);
}

TEST(Trajectory, CircleAngularRateIsSpeedOverRadius) {
  TrajectorySpec spec = spec_of(Shape::Circle, 20.0, 8.0);
  spec.radius_m = 25.0;
  for (const auto& s : sample_trajectory(spec)) {
    EXPECT_NEAR(s.angular_rate.norm(), 8.0 / 25.0, 1e-12);
    EXPECT_NEAR(s.velocity.norm(), 8.0, 1e-12);
  }
}

TEST(Trajectory, VelocityIsTheDerivativeOfPosition) {
  for (Shape shape : {Shape::Circle, Shape::FigureEight, Shape::CorridorWithTurns}) {
    const auto s = sample_trajectory(spec_of(shape, 30.0, 10.0));
    for (size_t k = 1; k + 1 < s.size(); k += 37) {
      const Vec3 fd = (s[k + 1].pose.translation - s[k - 1].pose.translation) / (s[k + 1].t - s[k - 1].t);
      EXPECT_LT((fd - s[k].velocity).norm(), 2e-3) << to_string(shape) << " t=" << s[k].t;
      const Vec3 fw = (s[k + 1].velocity - s[k - 1].velocity) / (s[k + 1].t - s[k - 1].t);
      EXPECT_LT((fw - s[k].acceleration).norm(), 2e-3) << to_string(shape) << " t=" << s[k].t;
    }
  }
}

TEST(Trajectory, BodyXFollowsVelocityAndAttitudeStaysLevel) {
  for (Shape shape : {Shape::Circle, Shape::FigureEight, Shape::CorridorWithTurns}) {
    for (const auto& s : sample_trajectory(spec_of(shape, 20.0, 10.0))) {
      const Vec3 x = s.pose.rotation * Vec3::UnitX();
      EXPECT_NEAR(x.dot(s.velocity.normalized()), 1.0, 1e-9);
      EXPECT_NEAR((s.pose.rotation * Vec3::UnitZ()).z(), 1.0, 1e-12);
    }
  }
}

TEST(Trajectory, CorridorTurnsSumToZeroHeadingChangeInPairs) {
  TrajectorySpec spec;
  spec.duration_s = spec.lead_in_s + 2 * (spec.turn_s + spec.straight_s);
  const auto s = sample_trajectory(spec);
  const Vec3 x0 = s.front().pose.rotation * Vec3::UnitX();
  const Vec3 x1 = s.back().pose.rotation * Vec3::UnitX();
  EXPECT_NEAR(x0.dot(x1), 1.0, 1e-9);
  double max_yaw = 0;
  for (const auto& p : s) {
    const Vec3 x = p.pose.rotation * Vec3::UnitX();
    max_yaw = std::max(max_yaw, std::atan2(x.y(), x.x()));
  }
  EXPECT_NEAR(max_yaw, spec.turn_angle_deg * M_PI / 180.0, 1e-6);
}

TEST(Trajectory, Validation) {
  TrajectorySpec s;
  s.duration_s = 0;
  EXPECT_THROW(s.validate(), Error);
  s = {};
  s.frame_rate_hz = 7;
  EXPECT_THROW(s.validate(), Error);
  s = {};
  s.shape = Shape::Circle;
  s.radius_m = 0;
  EXPECT_THROW(s.validate(), Error);
  EXPECT_EQ(shape_from_string("figure-eight"), Shape::FigureEight);
  for (Shape shape : {Shape::Straight, Shape::Circle, Shape::FigureEight, Shape::CorridorWithTurns}) {
    EXPECT_EQ(shape_from_string(to_string(shape)), shape);
  }
  EXPECT_THROW(shape_from_string("spiral"), Error);
}

TEST(World, DeterministicPerSeed) {
  TrajectorySpec spec = spec_of(Shape::CorridorWithTurns, 10, 10);
  const World a = gen_world(spec, 3000);
  const World b = gen_world(spec, 3000);
  ASSERT_EQ(a.landmarks.size(), b.landmarks.size());
  for (size_t i = 0; i < a.landmarks.size(); ++i) {
    ASSERT_EQ(a.landmarks[i].position, b.landmarks[i].position);
    ASSERT_EQ(a.landmarks[i].intensity, b.landmarks[i].intensity);
  }
  spec.seed = 2;
  const World c = gen_world(spec, 3000);
  EXPECT_NE(a.landmarks[0].position, c.landmarks[0].position);
}

TEST(World, FramesAtFrameRate) {
  const World w = gen_world(spec_of(Shape::Straight, 3, 5), 2000);
  EXPECT_EQ(w.frame_stride, 20u);
  EXPECT_EQ(w.frame_indices().size(), 31u);
  const auto frames = make_frames(w, false);
  ASSERT_EQ(frames.size(), 31u);
  EXPECT_NEAR(frames[10].timestamp, 1.0, 1e-12);
  ASSERT_TRUE(frames[10].true_pose.has_value());
  EXPECT_EQ(frames[10].true_pose->translation, w.camera_pose(200).translation);
  EXPECT_TRUE(frames[0].image.empty());
  EXPECT_EQ(make_frames(w, true)[0].image.width(), 640);
}

TEST(World, TooFewVisibleLandmarksThrows) {
  try {
    gen_world(spec_of(Shape::Straight, 5, 10), 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoVisibleLandmarks);
  }
}

TEST(World, ThinningCapsVisibleLandmarks) {
  CorridorGeometry geo;
  geo.max_visible = 10;
  geo.min_visible = 0;
  const World w = gen_world(spec_of(Shape::CorridorWithTurns, 20, 10), 400, geo);
  size_t most = 0;
  for (size_t i : w.frame_indices()) most = std::max(most, count_visible(w, i, geo.max_range_m));
  EXPECT_LE(most, 10u);
  EXPECT_GT(most, 0u);
}

TEST(Imu, StationaryMeasuresGravityReaction) {
  const World w = gen_world(spec_of(Shape::Straight, 2, 0.0), 2000);
  for (const auto& m : synthesize_imu(w, {}, Vec3(0, 0, -9.81))) {
    EXPECT_LT((m.acc - Vec3(0, 0, 9.81)).norm(), 1e-12);
    EXPECT_LT(m.gyro.norm(), 1e-15);
  }
}

TEST(Imu, CircleGyroIsYawRate) {
  TrajectorySpec spec = spec_of(Shape::Circle, 5, 10);
  spec.radius_m = 20;
  const World w = gen_world(spec, 2000);
  for (const auto& m : synthesize_imu(w, {}, Vec3(0, 0, -9.81))) EXPECT_NEAR(m.gyro.z(), 0.5, 1e-9);
}

TEST(Imu, BiasesAndNoiseStatistics) {
  SensorNoiseSpec n;
  n.bias_gyro = Vec3(0.002, -0.001, 0.0015);
  n.bias_accel = Vec3(0.05, -0.03, 0.02);
  n.sigma_gyro = 0.002;
  const World w = gen_world(spec_of(Shape::Straight, 60, 0.0), 2000);
  const auto imu = synthesize_imu(w, n, Vec3(0, 0, -9.81));
  Vec3 mean = Vec3::Zero();
  for (const auto& m : imu) mean += m.gyro / static_cast<double>(imu.size());
  const double sigma_discrete = n.sigma_gyro * std::sqrt(w.spec.imu_rate_hz);
  EXPECT_LT((mean - n.bias_gyro).cwiseAbs().maxCoeff(), 4 * sigma_discrete / std::sqrt(double(imu.size())));
  double var = 0;
  for (const auto& m : imu) var += (m.gyro.x() - mean.x()) * (m.gyro.x() - mean.x());
  EXPECT_NEAR(std::sqrt(var / double(imu.size())), sigma_discrete, 0.05 * sigma_discrete);
  EXPECT_LT((imu[5].acc - Vec3(0, 0, 9.81) - n.bias_accel).norm(), 1e-12);
}

TEST(Imu, DeadReckoningErrorIsSecondOrderInStep) {
  const double coarse = dead_reckoning_error(100.0);
  const double fine = dead_reckoning_error(200.0);
  EXPECT_GT(coarse / fine, 3.5) << coarse << " vs " << fine;
  EXPECT_LT(fine, 0.05);
}

TEST(Speed, ConstantSpeedCircle) {
  TrajectorySpec spec = spec_of(Shape::Circle, 10, 7.5);
  const World w = gen_world(spec, 2000);
  const auto sp = synthesize_speed(w, {});
  EXPECT_EQ(sp.size(), w.frame_indices().size());
  for (const auto& s : sp) EXPECT_NEAR(s.vx, 7.5, 1e-12);
}

TEST(Speed, DecelerationProfileWithinNoise) {
  TrajectorySpec spec = spec_of(Shape::Straight, 10, 10);
  spec.accel_mps2 = -0.8;
  const World w = gen_world(spec, 2000);
  SensorNoiseSpec n;
  n.sigma_speed = 0.1;
  for (const auto& s : synthesize_speed(w, n)) EXPECT_NEAR(s.vx, 10 - 0.8 * s.timestamp, 4.5 * 0.1);
}

TEST(Speed, AtRestIsZeroPlusNoise) {
  const World w = gen_world(spec_of(Shape::Straight, 20, 0), 2000);
  SensorNoiseSpec n;
  n.sigma_speed = 0.1;
  const auto sp = synthesize_speed(w, n);
  double mean = 0;
  for (const auto& s : sp) mean += s.vx / double(sp.size());
  EXPECT_LT(std::abs(mean), 4 * 0.1 / std::sqrt(double(sp.size())));
  EXPECT_TRUE(synthesize_speed(w, {})[3].vx == 0.0);
}

TEST(ReferenceMap, NodeEveryFiveMeters) {
  const World w = gen_world(spec_of(Shape::Straight, 10, 10), 4000);
  const TopologicalMap map = build_reference_map(w, 5.0);
  ASSERT_EQ(map.size(), 21u);
  for (size_t i = 0; i < map.size(); ++i) {
    const Pose& p = map.node(static_cast<int>(i)).pose;
    EXPECT_NEAR((p.translation - w.camera_pose(0).translation).x(), 5.0 * i, 1e-9);
  }
  EXPECT_THROW(build_reference_map(w, 0.0), Error);
}

TEST(ReferenceMap, NodeDepthMatchesLandmarks) {
  const World w = gen_world(spec_of(Shape::CorridorWithTurns, 5, 10), 6000);
  const TopologicalMap map = build_reference_map(w, 10.0);
  const TopoNode& n = map.node(2);
  int checked = 0;
  for (int y = 0; y < n.depth.height(); y += 3) {
    for (int x = 0; x < n.depth.width(); x += 3) {
      if (!valid_depth(n.depth.at(x, y))) continue;
      const Vec3 m = map_point_global(n, map.intrinsics(), {double(x), double(y)});
      double best = 1e9;
      for (const auto& l : w.landmarks) best = std::min(best, (l.position - m).norm());
      // Landmarks sit at sub-pixel positions; unprojecting the pixel center moves them by < 1 px of arc.
      EXPECT_LT(best, 0.5 * n.depth.at(x, y) / map.intrinsics().fx * 1.5);
      if (++checked > 50) return;
    }
  }
  EXPECT_GT(checked, 10);
}
