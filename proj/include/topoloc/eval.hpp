#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "topoloc/io.hpp"

namespace topoloc {

/// Timestamped poses with strictly increasing timestamps.
class Trajectory {
 public:
  Trajectory() = default;
  /// Throws DuplicateTimestamp when timestamps are not strictly increasing.
  explicit Trajectory(std::vector<StampedPose> poses);

  const std::vector<StampedPose>& poses() const { return poses_; }
  size_t size() const { return poses_.size(); }
  bool empty() const { return poses_.empty(); }

 private:
  std::vector<StampedPose> poses_;
};

struct ApeSample {
  double t = 0.0;
  double et = 0.0;   ///< translation error, m
  double er = 0.0;   ///< rotation error, rad
  double lon = 0.0;  ///< |error . body x| of the true pose, m
  double lat = 0.0;  ///< |error . body y| of the true pose, m
};

struct ApeReport {
  double ape_t_m = 0.0;
  double ape_r_rad = 0.0;
  double lon_m = 0.0;
  double lat_m = 0.0;
  size_t n_pairs = 0;
  std::vector<ApeSample> series;
};

/// Absolute pose error without alignment. Each estimate is paired with the
/// nearest unused truth pose within max_dt. Throws NoTimestampOverlap.
ApeReport ape(const Trajectory& estimate, const Trajectory& truth, double max_dt = 0.01);

/// JSON object with ape_t_m, ape_r_rad, lon_m, lat_m, n_pairs, series.
std::string ape_report_json(const ApeReport& report);
/// `t,et,er,lon,lat` per matched pose.
void write_error_csv(const std::filesystem::path& path, const ApeReport& report);

}  // namespace topoloc
