#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "topoloc/geometry.hpp"
#include "topoloc/ieskf.hpp"
#include "topoloc/io.hpp"
#include "topoloc/matching.hpp"
#include "topoloc/topomap.hpp"

namespace topoloc::sim {

enum class Shape { Straight, Circle, FigureEight, CorridorWithTurns };

Shape shape_from_string(const std::string& name);
std::string to_string(Shape shape);

struct TrajectorySpec {
  Shape shape = Shape::CorridorWithTurns;
  double duration_s = 60.0;
  double speed_mps = 10.0;  ///< initial speed for straight, constant otherwise
  double imu_rate_hz = 200.0;
  double frame_rate_hz = 10.0;
  std::uint64_t seed = 1;
  double height_m = 1.5;  ///< IMU height above the floor
  double accel_mps2 = 0.0;  ///< straight: constant longitudinal acceleration
  double radius_m = 40.0;   ///< circle radius; figure-eight lobe size
  /// Corridor: constant-velocity lead-in, then alternating left/right turns
  /// separated by straight runs.
  double lead_in_s = 2.0;
  double turn_s = 8.0;
  double straight_s = 8.0;
  double turn_angle_deg = 30.0;

  void validate() const;
};

/// Landmark placement around the path.
struct CorridorGeometry {
  double half_width_m = 6.0;
  double wall_height_m = 5.0;
  double floor_fraction = 0.3;
  double margin_m = 80.0;  ///< path extension before the start and past the end
  double max_range_m = 80.0;
  /// Generation fails when a frame sees fewer landmarks (0 disables).
  size_t min_visible = 8;
  /// Landmarks are thinned until no frame sees more than this (0 disables).
  size_t max_visible = 0;
};

struct SensorNoiseSpec {
  double sigma_accel = 0.0;  ///< m/s^2/sqrt(Hz)
  double sigma_gyro = 0.0;   ///< rad/s/sqrt(Hz)
  Vec3 bias_accel = Vec3::Zero();
  Vec3 bias_gyro = Vec3::Zero();
  double sigma_pixel = 0.0;
  double sigma_speed = 0.0;
  double outlier_fraction = 0.0;
};

/// Camera model shared by world generation, map rendering and matching.
struct SensorRig {
  CameraIntrinsics intrinsics{400.0, 400.0, 320.0, 240.0, 640, 480};
  Extrinsics extrinsics = Extrinsics::forward_camera();
};

struct TrajectorySample {
  double t = 0.0;
  Pose pose;  ///< IMU in global
  Vec3 velocity = Vec3::Zero();      ///< global
  Vec3 acceleration = Vec3::Zero();  ///< global
  Vec3 angular_rate = Vec3::Zero();  ///< body
};

struct World {
  TrajectorySpec spec;
  SensorRig rig;
  PointCloud landmarks;
  std::vector<TrajectorySample> samples;  ///< at imu_rate_hz, endpoints included
  size_t frame_stride = 1;                ///< IMU samples per frame

  std::vector<size_t> frame_indices() const;
  std::vector<Vec3> landmark_positions() const;
  std::vector<StampedPose> ground_truth() const;
  Pose camera_pose(size_t sample) const { return rig.extrinsics.camera_pose(samples[sample].pose); }
};

/// Analytic trajectory sampled at the IMU rate.
std::vector<TrajectorySample> sample_trajectory(const TrajectorySpec& spec);

/// Deterministic per seed. Throws NoVisibleLandmarks when a frame sees fewer
/// than geometry.min_visible landmarks.
World gen_world(const TrajectorySpec& spec, size_t landmark_count, const CorridorGeometry& geometry = {},
                const SensorRig& rig = {});

/// Landmarks in front of, in range of and inside the image of the camera.
size_t count_visible(const World& world, size_t sample, double max_range_m = 200.0);

/// a_m = R_k^T ((v_{k+1} - v_k) / dt - g) + b_a + n_a and
/// w_m = log(R_k^T R_{k+1}) / dt + b_w + n_w: the interval averages that a
/// zero-order-hold propagation integrates back onto the samples. The final
/// sample uses the instantaneous values.
std::vector<ImuSample> synthesize_imu(const World& world, const SensorNoiseSpec& noise, const Vec3& gravity);

/// Body-x velocity plus noise, one sample per frame.
std::vector<SpeedSample> synthesize_speed(const World& world, const SensorNoiseSpec& noise);

/// Nodes at ground-truth camera poses, the first sample at or past every
/// multiple of spacing along the path, rendered from the landmark cloud.
TopologicalMap build_reference_map(const World& world, double node_spacing_m);

/// Camera frames at the frame rate, tagged with their true camera pose.
/// Images are rendered from the landmark cloud when requested.
std::vector<CameraFrame> make_frames(const World& world, bool render_images);

}  // namespace topoloc::sim
