#pragma once

#include <optional>
#include <string>
#include <vector>

#include "topoloc/ieskf.hpp"
#include "topoloc/matching.hpp"
#include "topoloc/topomap.hpp"

namespace topoloc {

/// Per-frame record written as one JSON line.
struct FrameDiagnostics {
  double t = 0.0;
  int node_id = -1;
  size_t n_matches = 0;
  size_t n_inliers = 0;
  int iterations = 0;
  bool converged = false;
  double cost0 = 0.0;
  double cost_final = 0.0;
  std::vector<std::string> flags;
};

std::string to_json_line(const FrameDiagnostics& d);

/// Map-based localization loop: IMU propagation between frames, node lookup,
/// matching, outlier gating and the iterated update. Without a map or
/// matcher it dead-reckons on IMU (and speed, when enabled).
class Localizer {
 public:
  Localizer(const TopologicalMap* map, Matcher* matcher, Extrinsics extrinsics, FilterParams params);

  void reset(const FilterState& state, double t);
  const FilterState& state() const { return state_; }
  double time() const { return t_; }
  Pose camera_pose() const { return extr_.camera_pose(state_.x.pose()); }

  /// Zero-order hold propagation: each sample drives the interval up to the
  /// next sample, the last one up to t_end. Samples at or before the current
  /// time only update the held value.
  void propagate_to(const std::vector<ImuSample>& imu, double t_end);

  /// Propagates through `imu` to the frame time and applies the frame's
  /// measurements. Throws EmptyMap when a map is attached but has no nodes.
  FrameDiagnostics process_frame(const std::vector<ImuSample>& imu, const CameraFrame& frame,
                                 const std::optional<SpeedSample>& speed);

 private:
  void step(double dt);

  const TopologicalMap* map_;
  Matcher* matcher_;
  Extrinsics extr_;
  FilterParams params_;
  FilterState state_;
  double t_ = 0.0;
  std::optional<ImuSample> held_;
};

}  // namespace topoloc
