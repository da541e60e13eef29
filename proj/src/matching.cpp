#include "topoloc/matching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "topoloc/error.hpp"

namespace topoloc {

ReprojectedSet reproject_node_features(const TopoNode& node, const CorrespondenceSet& set,
                                       const CameraIntrinsics& intr,
                                       const Pose& current_camera_pose) {
  ReprojectedSet out;
  out.pairs.reserve(set.size());
  const Pose global_to_current = current_camera_pose.inverse();
  for (const auto& c : set.pairs) {
    Vec3 m;
    try {
      m = map_point_global(node, intr, c.node);
    } catch (const Error&) {
      ++out.dropped_no_depth;
      continue;
    }
    const Vec3 p_cur = global_to_current * m;
    if (!(p_cur.z() > 0.0)) {
      ++out.dropped_behind;
      continue;
    }
    out.pairs.push_back({c.node, project(intr, p_cur), c.current});
  }
  if (out.pairs.empty()) {
    throw Error(ErrorCode::AllPointsDropped,
                "no correspondence survived reprojection (" + std::to_string(out.dropped_no_depth) +
                    " without depth, " + std::to_string(out.dropped_behind) + " behind camera)");
  }
  return out;
}

InlierSet statistical_outlier_removal(const std::vector<ReprojectedPair>& pairs, double sigma_th) {
  if (pairs.empty()) {
    throw Error(ErrorCode::EmptyInput, "outlier removal needs at least one pair");
  }
  double sum_u = 0.0;
  double sum_v = 0.0;
  for (const auto& p : pairs) {
    sum_u += p.reprojected.u - p.current.u;
    sum_v += p.reprojected.v - p.current.v;
  }
  const double n = static_cast<double>(pairs.size());
  const double mean_u = sum_u / n;
  const double mean_v = sum_v / n;
  const double gate = 3.0 * sigma_th;
  InlierSet inliers;
  for (const auto& p : pairs) {
    const double du = (p.reprojected.u - p.current.u) - mean_u;
    const double dv = (p.reprojected.v - p.current.v) - mean_v;
    if (std::abs(du) < gate && std::abs(dv) < gate) {
      inliers.push_back(p);
    }
  }
  return inliers;
}

Matched3D2D restore_3d(const InlierSet& inliers, const TopoNode& node, const CameraIntrinsics& intr) {
  Matched3D2D out;
  out.matches.reserve(inliers.size());
  for (const auto& p : inliers) {
    try {
      out.matches.push_back({map_point_global(node, intr, p.node), p.current});
    } catch (const Error&) {
      ++out.dropped;
    }
  }
  return out;
}

CorrespondenceSet synthetic_match(const std::vector<Vec3>& landmarks, const Pose& true_current_pose,
                                  const Pose& reference_pose, const DepthImage* reference_depth,
                                  const CameraIntrinsics& intr, const SyntheticMatchOptions& options,
                                  std::uint64_t seed) {
  const Pose to_current = true_current_pose.inverse();
  const Pose to_reference = reference_pose.inverse();
  // Keep noisy current points inside the image without clamping in practice.
  const double margin = std::min(4.0 * options.sigma_px, 0.25 * std::min(intr.width, intr.height));
  auto inside = [&](const ImagePoint& f, double m) {
    return f.u >= m && f.v >= m && f.u <= intr.width - 1.0 - m && f.v <= intr.height - 1.0 - m;
  };

  CorrespondenceSet set;
  for (const auto& l : landmarks) {
    const Vec3 pc = to_current * l;
    const Vec3 pr = to_reference * l;
    if (pc.z() < options.min_depth_m || pr.z() < options.min_depth_m) continue;
    if (pc.norm() > options.max_range_m || pr.norm() > options.max_range_m) continue;
    const ImagePoint fc = project(intr, pc);
    const ImagePoint fr = project(intr, pr);
    if (!inside(fc, margin) || !inside(fr, 0.0)) continue;
    if (reference_depth != nullptr) {
      const PixelIndex px = nearest_pixel(fr.u, fr.v);
      if (!reference_depth->in_bounds(px.x, px.y)) continue;
      const float d = reference_depth->at(px.x, px.y);
      if (!valid_depth(d) || std::abs(static_cast<double>(d) - pr.z()) > 1e-4 * pr.z()) continue;
    }
    set.pairs.push_back({fc, fr});
  }
  if (set.pairs.empty()) {
    throw Error(ErrorCode::NoVisibleLandmarks, "no landmark visible in both views");
  }

  std::mt19937_64 rng(seed);
  if (options.max_matches > 0 && set.pairs.size() > options.max_matches) {
    std::shuffle(set.pairs.begin(), set.pairs.end(), rng);
    set.pairs.resize(options.max_matches);
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  for (auto& c : set.pairs) {
    if (options.sigma_px > 0.0) {
      c.current.u += options.sigma_px * noise(rng);
      c.current.v += options.sigma_px * noise(rng);
      c.current.u = std::clamp(c.current.u, 0.0, intr.width - 1.0);
      c.current.v = std::clamp(c.current.v, 0.0, intr.height - 1.0);
    }
  }

  const auto n_out = static_cast<size_t>(std::llround(options.outlier_fraction * set.size()));
  if (n_out > 0) {
    std::vector<size_t> idx(set.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::uniform_real_distribution<double> uu(0.0, intr.width - 1.0);
    std::uniform_real_distribution<double> vv(0.0, intr.height - 1.0);
    for (size_t k = 0; k < n_out; ++k) {
      set.pairs[idx[k]].current = {uu(rng), vv(rng)};
    }
  }
  return set;
}

CorrespondenceSet SyntheticMatcher::match(const MatchView& current, const MatchView& reference) {
  if (!current.camera_pose || !reference.camera_pose) {
    throw Error(ErrorCode::MatcherFailure, "synthetic matcher needs pose-tagged views");
  }
  const std::uint64_t seed = seed_ + calls_++;
  return synthetic_match(landmarks_, *current.camera_pose, *reference.camera_pose, reference.depth,
                         intr_, options_, seed);
}

void ReplayMatcher::add(double timestamp, io::RecordedMatches matches) {
  recorded_[timestamp] = std::move(matches);
}

const io::RecordedMatches* ReplayMatcher::find(double timestamp) const {
  auto it = recorded_.lower_bound(timestamp - 1e-6);
  if (it == recorded_.end() || std::abs(it->first - timestamp) > 1e-6) {
    return nullptr;
  }
  return &it->second;
}

CorrespondenceSet ReplayMatcher::match(const MatchView& current, const MatchView& /*reference*/) {
  const auto* rec = find(current.timestamp);
  if (rec == nullptr) {
    throw Error(ErrorCode::MatcherFailure,
                "no recorded correspondences for t=" + std::to_string(current.timestamp));
  }
  return CorrespondenceSet{rec->pairs};
}

std::optional<int> ReplayMatcher::preferred_node(double timestamp) const {
  const auto* rec = find(timestamp);
  if (rec == nullptr || rec->node_id < 0) return std::nullopt;
  return rec->node_id;
}

}  // namespace topoloc
