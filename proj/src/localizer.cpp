#include "topoloc/localizer.hpp"

#include <glog/logging.h>

#include <cmath>

#include <json.hpp>

#include "topoloc/error.hpp"

namespace topoloc {

namespace {

constexpr double kTimeTolerance = 1e-9;
constexpr double kMaxStep = 0.1;

double finite_or_zero(double v) { return std::isfinite(v) ? v : 0.0; }

}  // namespace

std::string to_json_line(const FrameDiagnostics& d) {
  nlohmann::ordered_json j;
  j["t"] = d.t;
  j["node_id"] = d.node_id;
  j["n_matches"] = d.n_matches;
  j["n_inliers"] = d.n_inliers;
  j["iterations"] = d.iterations;
  j["converged"] = d.converged;
  j["cost0"] = finite_or_zero(d.cost0);
  j["cost_final"] = finite_or_zero(d.cost_final);
  j["flags"] = d.flags;
  return j.dump();
}

Localizer::Localizer(const TopologicalMap* map, Matcher* matcher, Extrinsics extrinsics, FilterParams params)
    : map_(map), matcher_(matcher), extr_(extrinsics), params_(params) {}

void Localizer::reset(const FilterState& state, double t) {
  state_ = state;
  if (params_.freeze_gravity) {
    state_.P.middleRows<3>(block::kGravity).setZero();
    state_.P.middleCols<3>(block::kGravity).setZero();
  }
  t_ = t;
  held_.reset();
}

void Localizer::step(double dt) {
  while (dt > kTimeTolerance) {
    const double h = std::min(dt, kMaxStep);
    state_ = propagate(state_, *held_, h, params_.noise, params_.freeze_gravity);
    t_ += h;
    dt -= h;
  }
}

void Localizer::propagate_to(const std::vector<ImuSample>& imu, double t_end) {
  for (const auto& s : imu) {
    if (s.timestamp > t_end + kTimeTolerance) break;
    if (held_ && s.timestamp > t_ + kTimeTolerance) step(s.timestamp - t_);
    if (s.timestamp > t_) t_ = s.timestamp;
    held_ = s;
  }
  if (held_ && t_end > t_ + kTimeTolerance) step(t_end - t_);
  t_ = std::max(t_, t_end);
}

FrameDiagnostics Localizer::process_frame(const std::vector<ImuSample>& imu, const CameraFrame& frame,
                                          const std::optional<SpeedSample>& speed) {
  propagate_to(imu, frame.timestamp);
  FrameDiagnostics diag;
  diag.t = frame.timestamp;

  Matched3D2D restored;
  if (map_ != nullptr && matcher_ != nullptr) {
    if (map_->empty()) {
      throw Error(ErrorCode::EmptyMap, "localization map has no nodes");
    }
    const Pose cam = camera_pose();
    const TopoNode* node = nullptr;
    if (const auto preferred = matcher_->preferred_node(frame.timestamp);
        preferred && *preferred >= 0 && static_cast<size_t>(*preferred) < map_->size()) {
      node = &map_->node(*preferred);
    } else {
      node = &map_->nearest_node(cam.translation);
    }
    diag.node_id = node->node_id;
    if ((node->pose.translation - cam.translation).norm() > params_.max_node_distance_m) {
      diag.flags.emplace_back("node_too_far");
    } else {
      try {
        const MatchView current{&frame.image, nullptr, frame.true_pose, frame.timestamp};
        const MatchView reference{&node->image, &node->depth, node->pose, node->timestamp};
        const CorrespondenceSet corr = matcher_->match(current, reference);
        diag.n_matches = corr.size();
        const ReprojectedSet rep = reproject_node_features(*node, corr, map_->intrinsics(), cam);
        const InlierSet inliers = statistical_outlier_removal(rep.pairs, params_.sigma_th_px);
        restored = restore_3d(inliers, *node, map_->intrinsics());
        diag.n_inliers = restored.size();
      } catch (const Error& e) {
        diag.flags.emplace_back(e.code() == ErrorCode::NoVisibleLandmarks || e.code() == ErrorCode::MatcherFailure
                                    ? "matcher_failure"
                                    : "no_features");
        VLOG(1) << "frame t=" << frame.timestamp << ": " << e.what();
      }
    }
    if (restored.size() < params_.min_features) {
      if (!restored.empty()) diag.flags.emplace_back("too_few_features");
      restored.matches.clear();
    }
  }

  const std::optional<SpeedSample> used_speed = params_.use_speed ? speed : std::nullopt;
  if (restored.empty() && !used_speed) {
    diag.flags.emplace_back("propagation_only");
    return diag;
  }
  if (restored.empty()) diag.flags.emplace_back("speed_only");
  try {
    const CameraIntrinsics& intr = map_ != nullptr ? map_->intrinsics() : CameraIntrinsics{};
    UpdateResult up = iterated_update(state_, restored, used_speed, extr_, intr, params_);
    state_ = std::move(up.state);
    diag.iterations = up.diagnostics.iterations;
    diag.converged = up.diagnostics.converged;
    diag.cost0 = up.diagnostics.cost0;
    diag.cost_final = up.diagnostics.cost_final;
  } catch (const Error& e) {
    diag.flags.emplace_back("update_failed");
    LOG(WARNING) << "frame t=" << frame.timestamp << ": update skipped: " << e.what();
  }
  return diag;
}

}  // namespace topoloc
