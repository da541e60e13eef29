#pragma once

#include <optional>
#include <vector>

#include <json.hpp>

#include "topoloc/ieskf.hpp"
#include "topoloc/localizer.hpp"
#include "topoloc/sim.hpp"

namespace topoloc {

/// A complete synthetic experiment description.
struct Scenario {
  sim::TrajectorySpec trajectory;
  sim::CorridorGeometry corridor;
  sim::SensorNoiseSpec noise;
  sim::SensorRig rig;
  size_t landmark_count = 24000;
  double node_spacing_m = 5.0;
  Vec3 gravity{0.0, 0.0, -9.81};
  size_t max_matches = 0;  ///< cap on synthetic matcher output, 0 = none

  /// 60 s corridor with turns, 200 Hz IMU, 10 Hz frames, 1 px feature
  /// noise, 0.1 m/s speed noise and 20% outlier matches.
  static Scenario default_corridor();
};

/// Strict parse: unknown keys raise InvalidConfig. Missing keys keep the
/// defaults of `base`.
Scenario scenario_from_json(const nlohmann::json& j, const Scenario& base = Scenario::default_corridor());
nlohmann::json scenario_to_json(const Scenario& s);

/// Strict parse of filter settings over `base`.
FilterParams filter_params_from_json(const nlohmann::json& j, const FilterParams& base = {});
nlohmann::json filter_params_to_json(const FilterParams& p);

struct SyntheticData {
  sim::World world;
  std::vector<ImuSample> imu;
  std::vector<SpeedSample> speed;
  TopologicalMap map;
  std::vector<CameraFrame> frames;
};

SyntheticData simulate(const Scenario& s, bool render_images = false);

/// Synthetic matcher over the world landmarks, seeded from the scenario seed.
SyntheticMatcher make_matcher(const Scenario& s, const sim::World& world);

struct RunOptions {
  FilterParams filter;
  InitPriors priors;
  double init_window_s = 0.5;
  /// Without a map the run is pure dead reckoning (plus speed if enabled).
  bool use_map = true;
};

struct LocalizationRun {
  std::vector<StampedPose> estimate;  ///< IMU pose at each processed frame
  std::vector<FrameDiagnostics> diagnostics;
  double t_init = 0.0;
};

/// Initializes from the IMU window starting at the first sample and the
/// given IMU pose at the end of that window, then processes every later
/// frame. The initial speed is the speed sample closest to the window end.
LocalizationRun run_localization(const TopologicalMap* map, Matcher* matcher, const Extrinsics& extr,
                                 const std::vector<ImuSample>& imu, const std::vector<SpeedSample>& speed,
                                 const std::vector<CameraFrame>& frames, const Pose& initial_imu_pose,
                                 const RunOptions& options);

/// Ground-truth IMU pose at time t (nearest sample).
Pose truth_at(const sim::World& world, double t);

}  // namespace topoloc
