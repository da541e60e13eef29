#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "topoloc/geometry.hpp"
#include "topoloc/image.hpp"
#include "topoloc/io.hpp"
#include "topoloc/matching.hpp"
#include "topoloc/topomap.hpp"

namespace topoloc {

struct RasterOptions {
  double near_plane_m = 0.1;
  double max_range_m = 200.0;
};

struct Raster {
  IntensityImage intensity;
  DepthImage depth;
};

/// Renders the cloud from a camera pose (camera-in-global) with a 1-pixel
/// splat and a nearest-depth z-buffer. Pixels no point hits keep kNoDepth and
/// intensity 0. Throws EmptyCloud.
Raster rasterize(const PointCloud& cloud, const Pose& camera_pose, const CameraIntrinsics& intr,
                 const RasterOptions& options = {});

struct RansacOptions {
  int iterations = 500;
  double threshold_px = 3.0;
  double min_inlier_ratio = 0.3;
  std::uint64_t seed = 42;
};

/// Rotation-only consensus. Each hypothesis is the rotation aligning two
/// sampled point bearings with their feature bearings; a match is an inlier
/// when the rotated point bearing reprojects within threshold_px of its
/// feature. Points are expressed in the reference camera frame. Returns the
/// largest consensus set. Throws TooFewMatches (< 2) or NoConsensus.
Matched3D2D rotation_ransac(const Matched3D2D& matches, const CameraIntrinsics& intr,
                            const RansacOptions& options = {});

struct PnpResult {
  /// Maps points from their frame into the camera frame (the camera
  /// extrinsic). For points given in a predicted camera frame this is the
  /// predicted-to-actual correction.
  Pose transform;
  double rms_px = 0.0;
  int iterations = 0;
  std::vector<double> rms_history;  ///< per accepted Gauss-Newton step, starting with the initial guess
};

struct PnpOptions {
  int max_iterations = 50;
  double step_tolerance = 1e-12;
};

/// Minimizes total squared reprojection error with Gauss-Newton from a
/// linear initialization (DLT for general 3D points, homography for planar
/// ones). Steps that would raise the error are halved, so the RMS history is
/// non-increasing. Throws DegenerateConfiguration or NoConvergence.
PnpResult solve_pnp(const Matched3D2D& matches, const CameraIntrinsics& intr,
                    const PnpOptions& options = {});
/// Same, starting from a caller-supplied transform instead of the linear
/// initialization; usable with as few as 3 points.
PnpResult solve_pnp(const Matched3D2D& matches, const CameraIntrinsics& intr, const Pose& initial,
                    const PnpOptions& options = {});

/// refined = predicted * pnp^-1
Pose refine_node_pose(const Pose& predicted, const Pose& pnp_correction);

struct OdometrySequence {
  std::vector<StampedPose> poses;    ///< baseline frame in its odometry frame
  Pose camera_to_baseline;           ///< camera pose in the baseline frame
};

/// Prediction for frame k+1 from the refined pose of frame k and the
/// odometry increment between k and k+1. Throws MissingOdometry.
Pose chain_initial_pose(const Pose& prev_refined, const OdometrySequence& odo, size_t k);

struct MapGenOptions {
  RasterOptions raster;
  RansacOptions ransac;
  PnpOptions pnp;
  /// Rasterize/match/RANSAC/PnP is repeated from the refined pose until the
  /// correction falls under the tolerances, at most this many times.
  int max_passes = 3;
  double pass_tolerance_m = 1e-3;
  double pass_tolerance_rad = 1e-4;
  size_t min_matches = 6;
};

struct FrameReport {
  int frame_index = 0;
  bool accepted = false;
  int node_id = -1;
  size_t n_matches = 0;
  size_t n_inliers = 0;
  int passes = 0;
  double pnp_rms_px = 0.0;
  std::string failure;
};

struct MapGenResult {
  TopologicalMap map;
  std::vector<FrameReport> frames;
  /// index i -> node id or -1 when frame i was skipped
  std::vector<int> node_of_frame;
};

/// Offline map compilation. Frame i corresponds to odometry pose i. Failed
/// frames are skipped and the next prediction is chained through odometry.
MapGenResult generate_map(const PointCloud& cloud, const std::vector<CameraFrame>& frames,
                          const OdometrySequence& odo, const Pose& initial_pose,
                          const CameraIntrinsics& intr, Matcher& matcher,
                          const MapGenOptions& options = {});

}  // namespace topoloc
