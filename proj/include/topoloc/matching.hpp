#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "topoloc/geometry.hpp"
#include "topoloc/image.hpp"
#include "topoloc/io.hpp"
#include "topoloc/topomap.hpp"

namespace topoloc {

/// Pixel pairs between a current image and a reference (node or render) image.
struct CorrespondenceSet {
  std::vector<Correspondence> pairs;
  size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

/// A node feature pushed through the node depth into the current view.
struct ReprojectedPair {
  ImagePoint node;         ///< feature in the node image
  ImagePoint reprojected;  ///< node feature projected with the current pose estimate
  ImagePoint current;      ///< matched feature in the current image
};

struct ReprojectedSet {
  std::vector<ReprojectedPair> pairs;
  int dropped_no_depth = 0;
  int dropped_behind = 0;
};

/// Pairs that survived the 3-sigma displacement gate.
using InlierSet = std::vector<ReprojectedPair>;

struct PointFeature {
  Vec3 point;  ///< 3D point; frame given by the producing context (global for localization)
  ImagePoint feature;
};

struct Matched3D2D {
  std::vector<PointFeature> matches;
  int dropped = 0;
  size_t size() const { return matches.size(); }
  bool empty() const { return matches.empty(); }
};

struct CameraFrame {
  int index = 0;
  double timestamp = 0.0;
  IntensityImage image;
  /// Ground-truth camera-in-global pose, only known for simulated frames and
  /// only consumed by the synthetic matcher.
  std::optional<Pose> true_pose;
};

/// What a matcher sees of an image. Depth and pose tags are optional; the
/// synthetic matcher needs the pose to know which landmarks are in view.
struct MatchView {
  const IntensityImage* image = nullptr;
  const DepthImage* depth = nullptr;
  std::optional<Pose> camera_pose;
  double timestamp = 0.0;
};

/// Correspondence matcher contract. Calls on one instance must be externally
/// synchronized.
class Matcher {
 public:
  virtual ~Matcher() = default;
  /// Pairs are returned as (feature in `current`, feature in `reference`).
  virtual CorrespondenceSet match(const MatchView& current, const MatchView& reference) = 0;
  /// Recorded matchers know which node their pairs were made against.
  virtual std::optional<int> preferred_node(double /*timestamp*/) const { return std::nullopt; }
};

/// Transfer: unproject node features with the node depth and
/// node pose, then project with `current_camera_pose`. Pairs without depth or
/// behind the current camera are dropped and counted. Throws AllPointsDropped
/// when nothing survives.
ReprojectedSet reproject_node_features(const TopoNode& node, const CorrespondenceSet& set,
                                       const CameraIntrinsics& intr,
                                       const Pose& current_camera_pose);

/// Keeps pairs whose displacement (reprojected - current) lies within
/// 3 * sigma_th of the mean displacement on both axes. One pass; the mean
/// includes every input pair. Throws EmptyInput.
InlierSet statistical_outlier_removal(const std::vector<ReprojectedPair>& pairs, double sigma_th);

/// Global map point for each inlier, paired with its current-image feature.
/// The point is the node-depth unprojection of the node feature that produced
/// the reprojected location. Pairs without depth are dropped and counted.
Matched3D2D restore_3d(const InlierSet& inliers, const TopoNode& node, const CameraIntrinsics& intr);

struct SyntheticMatchOptions {
  double sigma_px = 0.0;
  double outlier_fraction = 0.0;
  double max_range_m = 200.0;
  double min_depth_m = 0.1;
  /// 0 means unlimited; otherwise a seeded random subset of this size.
  size_t max_matches = 0;
};

/// Ground-truth matcher. A landmark yields a pair when it projects inside
/// both images within range and, if the reference depth is given, is the
/// depth-buffer winner at its reference pixel. The current-image point gets
/// Gaussian noise; exactly round(outlier_fraction * n) pairs have their
/// current point replaced by a uniform in-bounds pixel. Throws
/// NoVisibleLandmarks when no landmark is seen by both views.
CorrespondenceSet synthetic_match(const std::vector<Vec3>& landmarks, const Pose& true_current_pose,
                                  const Pose& reference_pose, const DepthImage* reference_depth,
                                  const CameraIntrinsics& intr, const SyntheticMatchOptions& options,
                                  std::uint64_t seed);

/// Matcher adapter over synthetic_match. Requires pose tags on both views.
/// Call k uses seed base_seed + k, so a fixed call sequence is reproducible.
class SyntheticMatcher : public Matcher {
 public:
  SyntheticMatcher(std::vector<Vec3> landmarks, CameraIntrinsics intr, SyntheticMatchOptions options,
                   std::uint64_t seed)
      : landmarks_(std::move(landmarks)), intr_(intr), options_(options), seed_(seed) {}

  CorrespondenceSet match(const MatchView& current, const MatchView& reference) override;

 private:
  std::vector<Vec3> landmarks_;
  CameraIntrinsics intr_;
  SyntheticMatchOptions options_;
  std::uint64_t seed_;
  std::uint64_t calls_ = 0;
};

/// Replays recorded correspondences keyed by frame timestamp.
class ReplayMatcher : public Matcher {
 public:
  void add(double timestamp, io::RecordedMatches matches);
  CorrespondenceSet match(const MatchView& current, const MatchView& reference) override;
  std::optional<int> preferred_node(double timestamp) const override;

 private:
  const io::RecordedMatches* find(double timestamp) const;
  std::map<double, io::RecordedMatches> recorded_;
};

}  // namespace topoloc
