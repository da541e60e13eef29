#include "topoloc/sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "topoloc/error.hpp"
#include "topoloc/mapgen.hpp"

namespace topoloc::sim {

namespace {

constexpr double kPi = std::numbers::pi;

enum Stream : std::uint64_t { kLandmarks = 1, kImuNoise = 2, kSpeedNoise = 3, kThinning = 4 };

std::mt19937_64 make_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

Rotation yaw(double psi) { return so3_exp(Vec3(0.0, 0.0, psi)); }

struct Heading {
  double psi = 0.0;
  double rate = 0.0;
};

Heading corridor_heading(const TrajectorySpec& s, double t) {
  if (t < s.lead_in_s) return {};
  const double angle = s.turn_angle_deg * kPi / 180.0;
  const double peak = 2.0 * angle / s.turn_s;  // yaw rate peak of the sin^2 profile
  const double cycle = s.turn_s + s.straight_s;
  const double tau = t - s.lead_in_s;
  const auto c = static_cast<long>(std::floor(tau / cycle));
  const double r = tau - static_cast<double>(c) * cycle;
  const double base = (c % 2 == 1) ? angle : 0.0;
  const double sign = (c % 2 == 0) ? 1.0 : -1.0;
  if (r >= s.turn_s) return {base + sign * angle, 0.0};
  const double sn = std::sin(kPi * r / s.turn_s);
  return {base + sign * peak * (r / 2.0 - s.turn_s / (4.0 * kPi) * std::sin(2.0 * kPi * r / s.turn_s)),
          sign * peak * sn * sn};
}

/// Gauss-Legendre 5-point integral of the planar corridor velocity.
Vec3 corridor_displacement(const TrajectorySpec& s, double t0, double t1) {
  static constexpr std::array<double, 5> kNodes{0.0, -0.5384693101056831, 0.5384693101056831,
                                                -0.9061798459386640, 0.9061798459386640};
  static constexpr std::array<double, 5> kWeights{0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                                  0.2369268850561891, 0.2369268850561891};
  const double half = 0.5 * (t1 - t0);
  const double mid = 0.5 * (t1 + t0);
  Vec3 d = Vec3::Zero();
  for (size_t i = 0; i < kNodes.size(); ++i) {
    const double psi = corridor_heading(s, mid + half * kNodes[i]).psi;
    d += kWeights[i] * Vec3(std::cos(psi), std::sin(psi), 0.0);
  }
  return d * half * s.speed_mps;
}

TrajectorySample planar_sample(double t, const Vec3& p, const Vec3& vel, const Vec3& acc, double psi,
                               double psi_rate) {
  TrajectorySample out;
  out.t = t;
  out.pose = Pose{yaw(psi), p};
  out.velocity = vel;
  out.acceleration = acc;
  out.angular_rate = Vec3(0.0, 0.0, psi_rate);
  return out;
}

struct Centerline {
  std::vector<double> arc;
  std::vector<Vec3> points;
  std::vector<double> heading;

  double length() const { return arc.back(); }

  void at(double s, Vec3& p, double& psi) const {
    if (s <= 0.0) {
      psi = heading.front();
      p = points.front() + s * Vec3(std::cos(psi), std::sin(psi), 0.0);
      return;
    }
    if (s >= length()) {
      psi = heading.back();
      p = points.back() + (s - length()) * Vec3(std::cos(psi), std::sin(psi), 0.0);
      return;
    }
    const auto it = std::upper_bound(arc.begin(), arc.end(), s);
    const size_t i = static_cast<size_t>(it - arc.begin()) - 1;
    const double seg = arc[i + 1] - arc[i];
    const double w = seg > 0.0 ? (s - arc[i]) / seg : 0.0;
    p = (1.0 - w) * points[i] + w * points[i + 1];
    psi = heading[i];
  }
};

Centerline centerline(const std::vector<TrajectorySample>& samples) {
  Centerline c;
  double s = 0.0;
  for (size_t i = 0; i < samples.size(); ++i) {
    Vec3 p = samples[i].pose.translation;
    p.z() = 0.0;
    if (i > 0) s += (p - c.points.back()).norm();
    c.arc.push_back(s);
    c.points.push_back(p);
    const Vec3 fwd = samples[i].pose.rotation * Vec3::UnitX();
    c.heading.push_back(std::atan2(fwd.y(), fwd.x()));
  }
  return c;
}

bool visible(const Pose& to_camera, const CameraIntrinsics& intr, const Vec3& l, double max_range) {
  const Vec3 pc = to_camera * l;
  if (pc.z() < 0.1 || pc.norm() > max_range) return false;
  const ImagePoint f = project(intr, pc);
  return f.u >= 0.0 && f.v >= 0.0 && f.u <= intr.width - 1.0 && f.v <= intr.height - 1.0;
}

std::vector<double> path_arc_length(const World& world) {
  std::vector<double> arc(world.samples.size(), 0.0);
  for (size_t i = 1; i < arc.size(); ++i) {
    arc[i] = arc[i - 1] +
             (world.samples[i].pose.translation - world.samples[i - 1].pose.translation).norm();
  }
  return arc;
}

}  // namespace

Shape shape_from_string(const std::string& name) {
  if (name == "straight") return Shape::Straight;
  if (name == "circle") return Shape::Circle;
  if (name == "figure-eight") return Shape::FigureEight;
  if (name == "corridor-with-turns" || name == "corridor") return Shape::CorridorWithTurns;
  throw Error(ErrorCode::InvalidConfig, "unknown trajectory shape '" + name + "'");
}

std::string to_string(Shape shape) {
  switch (shape) {
    case Shape::Straight:
      return "straight";
    case Shape::Circle:
      return "circle";
    case Shape::FigureEight:
      return "figure-eight";
    case Shape::CorridorWithTurns:
      return "corridor-with-turns";
  }
  return "unknown";
}

void TrajectorySpec::validate() const {
  if (!(duration_s > 0.0) || !(imu_rate_hz > 0.0) || !(frame_rate_hz > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "trajectory duration and rates must be positive");
  }
  const double stride = imu_rate_hz / frame_rate_hz;
  if (std::abs(stride - std::round(stride)) > 1e-9 || stride < 1.0) {
    throw Error(ErrorCode::InvalidConfig, "imu_rate_hz must be an integer multiple of frame_rate_hz");
  }
  if ((shape == Shape::Circle || shape == Shape::FigureEight) && !(radius_m > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "radius_m must be positive");
  }
  if (shape == Shape::CorridorWithTurns && (!(turn_s > 0.0) || straight_s < 0.0 || lead_in_s < 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "corridor turn_s must be positive, straight_s and lead_in_s non-negative");
  }
}

std::vector<TrajectorySample> sample_trajectory(const TrajectorySpec& spec) {
  spec.validate();
  const auto n = static_cast<size_t>(std::llround(spec.duration_s * spec.imu_rate_hz)) + 1;
  std::vector<TrajectorySample> out;
  out.reserve(n);
  const double h = spec.height_m;
  const double v0 = spec.speed_mps;
  Vec3 corridor_pos(0.0, 0.0, h);
  for (size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / spec.imu_rate_hz;
    switch (spec.shape) {
      case Shape::Straight: {
        const double a = spec.accel_mps2;
        out.push_back(planar_sample(t, Vec3(v0 * t + 0.5 * a * t * t, 0.0, h), Vec3(v0 + a * t, 0.0, 0.0),
                                    Vec3(a, 0.0, 0.0), 0.0, 0.0));
        break;
      }
      case Shape::Circle: {
        const double r = spec.radius_m;
        const double w = v0 / r;
        const double psi = w * t;
        out.push_back(planar_sample(t, Vec3(r * std::sin(psi), r * (1.0 - std::cos(psi)), h),
                                    v0 * Vec3(std::cos(psi), std::sin(psi), 0.0),
                                    v0 * w * Vec3(-std::sin(psi), std::cos(psi), 0.0), psi, w));
        break;
      }
      case Shape::FigureEight: {
        // Lemniscate of Gerono: x = a sin(phi), y = a sin(phi) cos(phi).
        const double a = spec.radius_m;
        const double w = v0 / a;
        const double phi = w * t;
        const double xd = a * w * std::cos(phi);
        const double yd = a * w * std::cos(2.0 * phi);
        const double xdd = -a * w * w * std::sin(phi);
        const double ydd = -2.0 * a * w * w * std::sin(2.0 * phi);
        const double psi = std::atan2(yd, xd);
        const double psi_rate = (xd * ydd - yd * xdd) / (xd * xd + yd * yd);
        out.push_back(planar_sample(t, Vec3(a * std::sin(phi), a * std::sin(phi) * std::cos(phi), h),
                                    Vec3(xd, yd, 0.0), Vec3(xdd, ydd, 0.0), psi, psi_rate));
        break;
      }
      case Shape::CorridorWithTurns: {
        if (k > 0) corridor_pos += corridor_displacement(spec, out.back().t, t);
        const Heading hd = corridor_heading(spec, t);
        const Vec3 dir(std::cos(hd.psi), std::sin(hd.psi), 0.0);
        const Vec3 normal(-std::sin(hd.psi), std::cos(hd.psi), 0.0);
        out.push_back(planar_sample(t, corridor_pos, v0 * dir, v0 * hd.rate * normal, hd.psi, hd.rate));
        break;
      }
    }
  }
  return out;
}

std::vector<size_t> World::frame_indices() const {
  std::vector<size_t> idx;
  for (size_t i = 0; i < samples.size(); i += frame_stride) idx.push_back(i);
  return idx;
}

std::vector<Vec3> World::landmark_positions() const {
  std::vector<Vec3> out;
  out.reserve(landmarks.size());
  for (const auto& l : landmarks) out.push_back(l.position);
  return out;
}

std::vector<StampedPose> World::ground_truth() const {
  std::vector<StampedPose> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({s.t, s.pose});
  return out;
}

size_t count_visible(const World& world, size_t sample, double max_range_m) {
  const Pose to_camera = world.camera_pose(sample).inverse();
  size_t n = 0;
  for (const auto& l : world.landmarks) {
    n += visible(to_camera, world.rig.intrinsics, l.position, max_range_m) ? 1 : 0;
  }
  return n;
}

World gen_world(const TrajectorySpec& spec, size_t landmark_count, const CorridorGeometry& geometry,
                const SensorRig& rig) {
  if (landmark_count == 0) {
    throw Error(ErrorCode::InvalidConfig, "landmark_count must be positive");
  }
  rig.intrinsics.validate();
  World world;
  world.spec = spec;
  world.rig = rig;
  world.samples = sample_trajectory(spec);
  world.frame_stride = static_cast<size_t>(std::llround(spec.imu_rate_hz / spec.frame_rate_hz));

  const Centerline line = centerline(world.samples);
  auto rng = make_rng(spec.seed, kLandmarks);
  std::uniform_real_distribution<double> along(-geometry.margin_m, line.length() + geometry.margin_m);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> intensity(0, 255);
  world.landmarks.reserve(landmark_count);
  for (size_t i = 0; i < landmark_count; ++i) {
    Vec3 c;
    double psi = 0.0;
    line.at(along(rng), c, psi);
    const Vec3 normal(-std::sin(psi), std::cos(psi), 0.0);
    CloudPoint p;
    if (unit(rng) < geometry.floor_fraction) {
      p.position = c + (2.0 * unit(rng) - 1.0) * geometry.half_width_m * normal;
    } else {
      const double side = unit(rng) < 0.5 ? -1.0 : 1.0;
      p.position = c + side * geometry.half_width_m * normal;
      p.position.z() = geometry.wall_height_m * unit(rng);
    }
    p.intensity = intensity(rng);
    world.landmarks.push_back(p);
  }

  const std::vector<size_t> frames = world.frame_indices();
  if (geometry.max_visible > 0) {
    auto thin_rng = make_rng(spec.seed, kThinning);
    std::vector<char> keep(world.landmarks.size(), 1);
    for (size_t f : frames) {
      const Pose to_camera = world.camera_pose(f).inverse();
      std::vector<size_t> seen;
      for (size_t i = 0; i < world.landmarks.size(); ++i) {
        if (keep[i] && visible(to_camera, rig.intrinsics, world.landmarks[i].position, geometry.max_range_m)) {
          seen.push_back(i);
        }
      }
      if (seen.size() <= geometry.max_visible) continue;
      std::shuffle(seen.begin(), seen.end(), thin_rng);
      for (size_t j = geometry.max_visible; j < seen.size(); ++j) keep[seen[j]] = 0;
    }
    PointCloud kept;
    for (size_t i = 0; i < world.landmarks.size(); ++i) {
      if (keep[i]) kept.push_back(world.landmarks[i]);
    }
    world.landmarks = std::move(kept);
  }

  if (geometry.min_visible > 0) {
    for (size_t f : frames) {
      const size_t n = count_visible(world, f, geometry.max_range_m);
      if (n < geometry.min_visible) {
        throw Error(ErrorCode::NoVisibleLandmarks,
                    "frame at t=" + std::to_string(world.samples[f].t) + " sees " + std::to_string(n) +
                        " landmarks, need " + std::to_string(geometry.min_visible));
      }
    }
  }
  return world;
}

std::vector<ImuSample> synthesize_imu(const World& world, const SensorNoiseSpec& noise, const Vec3& gravity) {
  const auto& s = world.samples;
  auto rng = make_rng(world.spec.seed, kImuNoise);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double rate_sqrt = std::sqrt(world.spec.imu_rate_hz);
  const double sa = noise.sigma_accel * rate_sqrt;
  const double sg = noise.sigma_gyro * rate_sqrt;
  std::vector<ImuSample> out;
  out.reserve(s.size());
  for (size_t k = 0; k < s.size(); ++k) {
    ImuSample m;
    m.timestamp = s[k].t;
    const Rotation rt = s[k].pose.rotation.inverse();
    if (k + 1 < s.size()) {
      const double dt = s[k + 1].t - s[k].t;
      m.acc = rt * ((s[k + 1].velocity - s[k].velocity) / dt - gravity);
      m.gyro = so3_log(rt * s[k + 1].pose.rotation) / dt;
    } else {
      m.acc = rt * (s[k].acceleration - gravity);
      m.gyro = s[k].angular_rate;
    }
    const Vec3 na(gauss(rng), gauss(rng), gauss(rng));
    const Vec3 ng(gauss(rng), gauss(rng), gauss(rng));
    m.acc += noise.bias_accel + sa * na;
    m.gyro += noise.bias_gyro + sg * ng;
    out.push_back(m);
  }
  return out;
}

std::vector<SpeedSample> synthesize_speed(const World& world, const SensorNoiseSpec& noise) {
  auto rng = make_rng(world.spec.seed, kSpeedNoise);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<SpeedSample> out;
  for (size_t i : world.frame_indices()) {
    const auto& s = world.samples[i];
    const double vx = s.velocity.dot(s.pose.rotation * Vec3::UnitX());
    out.push_back({s.t, vx + noise.sigma_speed * gauss(rng)});
  }
  return out;
}

TopologicalMap build_reference_map(const World& world, double node_spacing_m) {
  if (!(node_spacing_m > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "node spacing must be positive");
  }
  const CameraIntrinsics& intr = world.rig.intrinsics;
  TopologicalMap map(intr);
  const std::vector<double> arc = path_arc_length(world);
  constexpr double kTol = 1e-6;
  size_t last = arc.size();
  for (int k = 0;; ++k) {
    const double target = k * node_spacing_m;
    if (target > arc.back() + kTol) break;
    const auto it = std::lower_bound(arc.begin(), arc.end(), target - kTol);
    if (it == arc.end()) break;
    const auto i = static_cast<size_t>(it - arc.begin());
    if (i == last) continue;
    last = i;
    const Pose cam = world.camera_pose(i);
    Raster r = rasterize(world.landmarks, cam, intr);
    TopoNode node;
    node.depth = std::move(r.depth);
    node.image = std::move(r.intensity);
    node.pose = cam;
    node.timestamp = world.samples[i].t;
    map.insert_node(std::move(node));
  }
  map.rebuild_index();
  return map;
}

std::vector<CameraFrame> make_frames(const World& world, bool render_images) {
  std::vector<CameraFrame> frames;
  int index = 0;
  for (size_t i : world.frame_indices()) {
    CameraFrame f;
    f.index = index++;
    f.timestamp = world.samples[i].t;
    f.true_pose = world.camera_pose(i);
    if (render_images) {
      f.image = rasterize(world.landmarks, *f.true_pose, world.rig.intrinsics).intensity;
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace topoloc::sim
