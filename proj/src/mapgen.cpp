#include "topoloc/mapgen.hpp"

#include <glog/logging.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/SVD>

#include "topoloc/error.hpp"

namespace topoloc {

Raster rasterize(const PointCloud& cloud, const Pose& camera_pose, const CameraIntrinsics& intr,
                 const RasterOptions& options) {
  if (cloud.empty()) {
    throw Error(ErrorCode::EmptyCloud, "cannot rasterize an empty point cloud");
  }
  Raster out{IntensityImage(intr.width, intr.height, 0), DepthImage(intr.width, intr.height, kNoDepth)};
  const Pose to_camera = camera_pose.inverse();
  const Mat3 r = to_camera.rotation.matrix();
  const Vec3 t = to_camera.translation;
  const double max_range2 = options.max_range_m * options.max_range_m;
  for (const auto& p : cloud) {
    const Vec3 pc = r * p.position + t;
    if (pc.z() <= options.near_plane_m || pc.squaredNorm() > max_range2) continue;
    const ImagePoint f = project(intr, pc);
    const PixelIndex px = nearest_pixel(f.u, f.v);
    if (!out.depth.in_bounds(px.x, px.y)) continue;
    float& d = out.depth.at(px.x, px.y);
    const auto z = static_cast<float>(pc.z());
    if (!valid_depth(d) || z < d) {
      d = z;
      out.intensity.at(px.x, px.y) =
          static_cast<std::uint8_t>(std::clamp(std::lround(p.intensity), 0L, 255L));
    }
  }
  return out;
}

namespace {

Vec3 feature_bearing(const CameraIntrinsics& intr, const ImagePoint& f) {
  return Vec3((f.u - intr.cx) / intr.fx, (f.v - intr.cy) / intr.fy, 1.0).normalized();
}

/// Rotation R minimizing sum |to_i - R from_i|^2.
Mat3 align_bearings(const std::vector<Vec3>& from, const std::vector<Vec3>& to,
                    const std::vector<size_t>& idx) {
  Mat3 h = Mat3::Zero();
  for (size_t i : idx) h += to[i] * from[i].transpose();
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

std::vector<size_t> consensus(const Mat3& r, const std::vector<Vec3>& from,
                              const Matched3D2D& matches, const CameraIntrinsics& intr,
                              double threshold_px) {
  std::vector<size_t> inliers;
  const double thr2 = threshold_px * threshold_px;
  for (size_t i = 0; i < from.size(); ++i) {
    const Vec3 q = r * from[i];
    if (q.z() <= 0.0) continue;
    const ImagePoint f = project(intr, q);
    const ImagePoint& m = matches.matches[i].feature;
    const double du = f.u - m.u;
    const double dv = f.v - m.v;
    if (du * du + dv * dv < thr2) inliers.push_back(i);
  }
  return inliers;
}

}  // namespace

Matched3D2D rotation_ransac(const Matched3D2D& matches, const CameraIntrinsics& intr,
                            const RansacOptions& options) {
  const size_t n = matches.size();
  if (n < 2) {
    throw Error(ErrorCode::TooFewMatches, "rotation RANSAC needs at least 2 matches, got " + std::to_string(n));
  }
  std::vector<Vec3> from(n);
  std::vector<Vec3> to(n);
  for (size_t i = 0; i < n; ++i) {
    from[i] = matches.matches[i].point.normalized();
    to[i] = feature_bearing(intr, matches.matches[i].feature);
  }

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<size_t> pick(0, n - 1);
  std::vector<size_t> best;
  for (int it = 0; it < options.iterations; ++it) {
    const size_t a = pick(rng);
    size_t b = pick(rng);
    while (b == a) b = pick(rng);
    // Near-parallel sample bearings do not pin down the rotation.
    if (from[a].cross(from[b]).norm() < 1e-6 || to[a].cross(to[b]).norm() < 1e-6) continue;
    const Mat3 r = align_bearings(from, to, {a, b});
    auto inliers = consensus(r, from, matches, intr, options.threshold_px);
    if (inliers.size() > best.size()) best = std::move(inliers);
    if (best.size() == n) break;
  }
  if (best.size() >= 2) {
    auto refit = consensus(align_bearings(from, to, best), from, matches, intr, options.threshold_px);
    if (refit.size() >= best.size()) best = std::move(refit);
  }
  if (best.size() < 2 || static_cast<double>(best.size()) < options.min_inlier_ratio * n) {
    throw Error(ErrorCode::NoConsensus, "best rotation hypothesis explains " +
                                            std::to_string(best.size()) + " of " + std::to_string(n));
  }
  Matched3D2D out;
  out.matches.reserve(best.size());
  for (size_t i : best) out.matches.push_back(matches.matches[i]);
  out.dropped = static_cast<int>(n - best.size());
  return out;
}

Pose refine_node_pose(const Pose& predicted, const Pose& pnp_correction) {
  return predicted * pnp_correction.inverse();
}

Pose chain_initial_pose(const Pose& prev_refined, const OdometrySequence& odo, size_t k) {
  if (k + 1 >= odo.poses.size()) {
    throw Error(ErrorCode::MissingOdometry,
                "odometry has no pose pair (" + std::to_string(k) + ", " + std::to_string(k + 1) + ")");
  }
  const Pose step = odo.poses[k].pose.inverse() * odo.poses[k + 1].pose;
  return prev_refined * odo.camera_to_baseline.inverse() * step * odo.camera_to_baseline;
}

MapGenResult generate_map(const PointCloud& cloud, const std::vector<CameraFrame>& frames,
                          const OdometrySequence& odo, const Pose& initial_pose,
                          const CameraIntrinsics& intr, Matcher& matcher,
                          const MapGenOptions& options) {
  if (cloud.empty()) {
    throw Error(ErrorCode::EmptyCloud, "map generation needs a non-empty point cloud");
  }
  if (odo.poses.size() < frames.size()) {
    throw Error(ErrorCode::MissingOdometry, std::to_string(frames.size()) + " frames but " +
                                                std::to_string(odo.poses.size()) + " odometry poses");
  }
  MapGenResult result;
  result.map.set_intrinsics(intr);
  Pose predicted = initial_pose;
  for (size_t i = 0; i < frames.size(); ++i) {
    const CameraFrame& frame = frames[i];
    FrameReport report;
    report.frame_index = static_cast<int>(i);
    Pose refined = predicted;
    try {
      Pose pose = predicted;
      for (int pass = 0; pass < options.max_passes; ++pass) {
        const Raster render = rasterize(cloud, pose, intr, options.raster);
        const MatchView current{&frame.image, nullptr, frame.true_pose, frame.timestamp};
        const MatchView reference{&render.intensity, &render.depth, pose, frame.timestamp};
        const CorrespondenceSet corr = matcher.match(current, reference);

        // Lift render features to 3D with the render depth (points in the
        // predicted camera frame).
        Matched3D2D lifted;
        for (const auto& c : corr.pairs) {
          try {
            lifted.matches.push_back({depth_to_point(render.depth, intr, c.node), c.current});
          } catch (const Error&) {
            ++lifted.dropped;
          }
        }
        report.n_matches = lifted.size();
        if (lifted.size() < options.min_matches) {
          throw Error(ErrorCode::TooFewMatches,
                      std::to_string(lifted.size()) + " liftable matches in frame " + std::to_string(i));
        }
        const Matched3D2D inliers = rotation_ransac(lifted, intr, options.ransac);
        report.n_inliers = inliers.size();
        const PnpResult pnp = solve_pnp(inliers, intr, options.pnp);
        report.pnp_rms_px = pnp.rms_px;
        pose = refine_node_pose(pose, pnp.transform);
        report.passes = pass + 1;
        const double dt = pnp.transform.translation.norm();
        const double dr = so3_log(pnp.transform.rotation).norm();
        if (dt < options.pass_tolerance_m && dr < options.pass_tolerance_rad) break;
      }
      Raster final_render = rasterize(cloud, pose, intr, options.raster);
      TopoNode node;
      node.depth = std::move(final_render.depth);
      // Without a camera image the node keeps the rendered intensity.
      node.image = frame.image.empty() ? std::move(final_render.intensity) : frame.image;
      node.pose = pose;
      node.timestamp = frame.timestamp;
      report.node_id = result.map.insert_node(std::move(node));
      report.accepted = true;
      refined = pose;
    } catch (const Error& e) {
      report.failure = e.what();
      LOG(WARNING) << "mapgen: frame " << i << " skipped, chaining through odometry: " << e.what();
    }
    result.node_of_frame.push_back(report.node_id);
    result.frames.push_back(report);
    if (i + 1 < frames.size()) {
      predicted = chain_initial_pose(refined, odo, i);
    }
  }
  result.map.rebuild_index();
  return result;
}

}  // namespace topoloc
