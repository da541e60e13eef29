#include "topoloc/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "topoloc/error.hpp"

namespace topoloc {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) {
    throw Error(ErrorCode::InvalidConfig, where + " must be a JSON object");
  }
  for (const auto& [key, value] : j.items()) {
    if (allowed.count(key) == 0) {
      throw Error(ErrorCode::InvalidConfig, "unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, where + "." + key + ": " + e.what());
  }
}

void read_vec3(const json& j, const char* key, Vec3& out, const std::string& where) {
  if (!j.contains(key)) return;
  const json& a = j.at(key);
  if (!a.is_array() || a.size() != 3 || !a[0].is_number() || !a[1].is_number() || !a[2].is_number()) {
    throw Error(ErrorCode::InvalidConfig, where + "." + key + " must be an array of 3 numbers");
  }
  out = Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
}

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

Scenario Scenario::default_corridor() {
  Scenario s;
  s.noise.sigma_accel = 0.02;
  s.noise.sigma_gyro = 0.002;
  s.noise.bias_accel = Vec3(0.05, -0.03, 0.02);
  s.noise.bias_gyro = Vec3(0.002, -0.001, 0.0015);
  s.noise.sigma_pixel = 1.0;
  s.noise.sigma_speed = 0.1;
  s.noise.outlier_fraction = 0.2;
  return s;
}

Scenario scenario_from_json(const json& j, const Scenario& base) {
  Scenario s = base;
  check_keys(j, {"trajectory", "corridor", "noise", "camera", "landmark_count", "node_spacing_m", "gravity",
                 "max_matches"},
             "scenario");
  if (j.contains("trajectory")) {
    const json& t = j.at("trajectory");
    const std::string w = "trajectory";
    check_keys(t, {"shape", "duration_s", "speed_mps", "imu_rate_hz", "frame_rate_hz", "seed", "height_m",
                   "accel_mps2", "radius_m", "lead_in_s", "turn_s", "straight_s", "turn_angle_deg"},
               w);
    auto& tr = s.trajectory;
    if (t.contains("shape")) {
      std::string shape;
      read(t, "shape", shape, w);
      tr.shape = sim::shape_from_string(shape);
    }
    read(t, "duration_s", tr.duration_s, w);
    read(t, "speed_mps", tr.speed_mps, w);
    read(t, "imu_rate_hz", tr.imu_rate_hz, w);
    read(t, "frame_rate_hz", tr.frame_rate_hz, w);
    read(t, "seed", tr.seed, w);
    read(t, "height_m", tr.height_m, w);
    read(t, "accel_mps2", tr.accel_mps2, w);
    read(t, "radius_m", tr.radius_m, w);
    read(t, "lead_in_s", tr.lead_in_s, w);
    read(t, "turn_s", tr.turn_s, w);
    read(t, "straight_s", tr.straight_s, w);
    read(t, "turn_angle_deg", tr.turn_angle_deg, w);
  }
  if (j.contains("corridor")) {
    const json& c = j.at("corridor");
    const std::string w = "corridor";
    check_keys(c, {"half_width_m", "wall_height_m", "floor_fraction", "margin_m", "max_range_m", "min_visible",
                   "max_visible"},
               w);
    auto& g = s.corridor;
    read(c, "half_width_m", g.half_width_m, w);
    read(c, "wall_height_m", g.wall_height_m, w);
    read(c, "floor_fraction", g.floor_fraction, w);
    read(c, "margin_m", g.margin_m, w);
    read(c, "max_range_m", g.max_range_m, w);
    read(c, "min_visible", g.min_visible, w);
    read(c, "max_visible", g.max_visible, w);
  }
  if (j.contains("noise")) {
    const json& n = j.at("noise");
    const std::string w = "noise";
    check_keys(n, {"sigma_accel", "sigma_gyro", "bias_accel", "bias_gyro", "sigma_pixel", "sigma_speed",
                   "outlier_fraction"},
               w);
    auto& ns = s.noise;
    read(n, "sigma_accel", ns.sigma_accel, w);
    read(n, "sigma_gyro", ns.sigma_gyro, w);
    read_vec3(n, "bias_accel", ns.bias_accel, w);
    read_vec3(n, "bias_gyro", ns.bias_gyro, w);
    read(n, "sigma_pixel", ns.sigma_pixel, w);
    read(n, "sigma_speed", ns.sigma_speed, w);
    read(n, "outlier_fraction", ns.outlier_fraction, w);
    if (ns.sigma_accel < 0 || ns.sigma_gyro < 0 || ns.sigma_pixel < 0 || ns.sigma_speed < 0 ||
        ns.outlier_fraction < 0 || ns.outlier_fraction >= 1) {
      throw Error(ErrorCode::InvalidConfig, "noise sigmas must be non-negative, outlier_fraction in [0, 1)");
    }
  }
  if (j.contains("camera")) {
    const json& c = j.at("camera");
    const std::string w = "camera";
    check_keys(c, {"fx", "fy", "cx", "cy", "width", "height"}, w);
    auto& in = s.rig.intrinsics;
    read(c, "fx", in.fx, w);
    read(c, "fy", in.fy, w);
    read(c, "cx", in.cx, w);
    read(c, "cy", in.cy, w);
    read(c, "width", in.width, w);
    read(c, "height", in.height, w);
    try {
      in.validate();
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidConfig, std::string("camera: ") + e.what());
    }
  }
  read(j, "landmark_count", s.landmark_count, "scenario");
  read(j, "node_spacing_m", s.node_spacing_m, "scenario");
  read_vec3(j, "gravity", s.gravity, "scenario");
  read(j, "max_matches", s.max_matches, "scenario");
  try {
    s.trajectory.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  return s;
}

json scenario_to_json(const Scenario& s) {
  const auto& t = s.trajectory;
  const auto& c = s.corridor;
  const auto& n = s.noise;
  const auto& in = s.rig.intrinsics;
  json j;
  j["trajectory"] = {{"shape", sim::to_string(t.shape)}, {"duration_s", t.duration_s},
                     {"speed_mps", t.speed_mps},         {"imu_rate_hz", t.imu_rate_hz},
                     {"frame_rate_hz", t.frame_rate_hz}, {"seed", t.seed},
                     {"height_m", t.height_m},           {"accel_mps2", t.accel_mps2},
                     {"radius_m", t.radius_m},           {"lead_in_s", t.lead_in_s},
                     {"turn_s", t.turn_s},               {"straight_s", t.straight_s},
                     {"turn_angle_deg", t.turn_angle_deg}};
  j["corridor"] = {{"half_width_m", c.half_width_m}, {"wall_height_m", c.wall_height_m},
                   {"floor_fraction", c.floor_fraction}, {"margin_m", c.margin_m},
                   {"max_range_m", c.max_range_m},   {"min_visible", c.min_visible},
                   {"max_visible", c.max_visible}};
  j["noise"] = {{"sigma_accel", n.sigma_accel},   {"sigma_gyro", n.sigma_gyro},
                {"bias_accel", vec3_json(n.bias_accel)}, {"bias_gyro", vec3_json(n.bias_gyro)},
                {"sigma_pixel", n.sigma_pixel},   {"sigma_speed", n.sigma_speed},
                {"outlier_fraction", n.outlier_fraction}};
  j["camera"] = {{"fx", in.fx}, {"fy", in.fy}, {"cx", in.cx}, {"cy", in.cy}, {"width", in.width}, {"height", in.height}};
  j["landmark_count"] = s.landmark_count;
  j["node_spacing_m"] = s.node_spacing_m;
  j["gravity"] = vec3_json(s.gravity);
  j["max_matches"] = s.max_matches;
  return j;
}

FilterParams filter_params_from_json(const json& j, const FilterParams& base) {
  FilterParams p = base;
  const std::string w = "filter";
  check_keys(j, {"n_theta", "n_v", "n_bias_acc", "n_bias_gyro", "r_feature", "r_speed", "epsilon", "kappa_max",
                 "min_features", "sigma_th_px", "min_depth_m", "freeze_gravity", "use_speed",
                 "max_node_distance_m"},
             w);
  read(j, "n_theta", p.noise.n_theta, w);
  read(j, "n_v", p.noise.n_v, w);
  read(j, "n_bias_acc", p.noise.n_bias_acc, w);
  read(j, "n_bias_gyro", p.noise.n_bias_gyro, w);
  read(j, "r_feature", p.noise.r_feature, w);
  read(j, "r_speed", p.noise.r_speed, w);
  read(j, "epsilon", p.epsilon, w);
  read(j, "kappa_max", p.kappa_max, w);
  read(j, "min_features", p.min_features, w);
  read(j, "sigma_th_px", p.sigma_th_px, w);
  read(j, "min_depth_m", p.min_depth_m, w);
  read(j, "freeze_gravity", p.freeze_gravity, w);
  read(j, "use_speed", p.use_speed, w);
  read(j, "max_node_distance_m", p.max_node_distance_m, w);
  const auto& nz = p.noise;
  if (!(nz.n_theta > 0 && nz.n_v > 0 && nz.n_bias_acc > 0 && nz.n_bias_gyro > 0 && nz.r_feature > 0 &&
        nz.r_speed > 0)) {
    throw Error(ErrorCode::InvalidConfig, "filter noise parameters must be positive");
  }
  if (p.kappa_max < 1 || !(p.epsilon > 0)) {
    throw Error(ErrorCode::InvalidConfig, "kappa_max must be >= 1 and epsilon positive");
  }
  return p;
}

json filter_params_to_json(const FilterParams& p) {
  json j = {{"n_theta", p.noise.n_theta},         {"n_v", p.noise.n_v},
            {"n_bias_acc", p.noise.n_bias_acc},   {"n_bias_gyro", p.noise.n_bias_gyro},
            {"r_feature", p.noise.r_feature},     {"r_speed", p.noise.r_speed},
            {"epsilon", p.epsilon},               {"kappa_max", p.kappa_max},
            {"min_features", p.min_features},     {"sigma_th_px", p.sigma_th_px},
            {"min_depth_m", p.min_depth_m},       {"freeze_gravity", p.freeze_gravity},
            {"use_speed", p.use_speed}};
  if (std::isfinite(p.max_node_distance_m)) j["max_node_distance_m"] = p.max_node_distance_m;
  return j;
}

SyntheticData simulate(const Scenario& s, bool render_images) {
  SyntheticData d;
  d.world = sim::gen_world(s.trajectory, s.landmark_count, s.corridor, s.rig);
  d.imu = sim::synthesize_imu(d.world, s.noise, s.gravity);
  d.speed = sim::synthesize_speed(d.world, s.noise);
  d.map = sim::build_reference_map(d.world, s.node_spacing_m);
  d.frames = sim::make_frames(d.world, render_images);
  return d;
}

SyntheticMatcher make_matcher(const Scenario& s, const sim::World& world) {
  SyntheticMatchOptions opt;
  opt.sigma_px = s.noise.sigma_pixel;
  opt.outlier_fraction = s.noise.outlier_fraction;
  opt.max_range_m = s.corridor.max_range_m;
  opt.max_matches = s.max_matches;
  return SyntheticMatcher(world.landmark_positions(), s.rig.intrinsics, opt,
                          s.trajectory.seed * 1000003ULL + 7ULL);
}

Pose truth_at(const sim::World& world, double t) {
  const auto& s = world.samples;
  const auto it = std::lower_bound(s.begin(), s.end(), t,
                                   [](const sim::TrajectorySample& a, double v) { return a.t < v; });
  if (it == s.end()) return s.back().pose;
  if (it == s.begin()) return it->pose;
  return (it->t - t) < (t - std::prev(it)->t) ? it->pose : std::prev(it)->pose;
}

LocalizationRun run_localization(const TopologicalMap* map, Matcher* matcher, const Extrinsics& extr,
                                 const std::vector<ImuSample>& imu, const std::vector<SpeedSample>& speed,
                                 const std::vector<CameraFrame>& frames, const Pose& initial_imu_pose,
                                 const RunOptions& options) {
  if (imu.empty()) {
    throw Error(ErrorCode::EmptyInput, "no IMU samples");
  }
  LocalizationRun run;
  const double t0 = imu.front().timestamp;
  run.t_init = t0 + options.init_window_s;
  std::vector<ImuSample> window;
  for (const auto& s : imu) {
    if (s.timestamp < run.t_init - 1e-9) window.push_back(s);
  }
  double v0 = 0.0;
  if (!speed.empty()) {
    const auto best = std::min_element(speed.begin(), speed.end(), [&](const SpeedSample& a, const SpeedSample& b) {
      return std::abs(a.timestamp - run.t_init) < std::abs(b.timestamp - run.t_init);
    });
    v0 = best->vx;
  }
  const FilterState init = initialize(initial_imu_pose, window, options.priors, v0, options.init_window_s);

  Localizer loc(options.use_map ? map : nullptr, options.use_map ? matcher : nullptr, extr, options.filter);
  loc.reset(init, run.t_init);

  // The sample at t_init starts the hold; earlier ones belong to the window.
  size_t next = 0;
  while (next < imu.size() && imu[next].timestamp < run.t_init - 1e-9) ++next;
  size_t next_speed = 0;
  std::vector<ImuSample> slice;
  for (const auto& frame : frames) {
    if (frame.timestamp <= run.t_init + 1e-9) continue;
    slice.clear();
    while (next < imu.size() && imu[next].timestamp <= frame.timestamp + 1e-9) slice.push_back(imu[next++]);
    std::optional<SpeedSample> sp;
    while (next_speed < speed.size() && speed[next_speed].timestamp < frame.timestamp - 1e-6) ++next_speed;
    if (next_speed < speed.size() && std::abs(speed[next_speed].timestamp - frame.timestamp) <= 1e-6) {
      sp = speed[next_speed];
    }
    run.diagnostics.push_back(loc.process_frame(slice, frame, sp));
    run.estimate.push_back({frame.timestamp, loc.state().x.pose()});
  }
  return run;
}

}  // namespace topoloc
