#include "commands.hpp"

#include <glog/logging.h>

#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "topoloc/error.hpp"
#include "topoloc/eval.hpp"
#include "topoloc/io.hpp"
#include "topoloc/localizer.hpp"
#include "topoloc/mapgen.hpp"
#include "topoloc/scenario.hpp"

namespace fs = std::filesystem;

namespace topoloc::cli {

namespace {

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw Error(ErrorCode::InvalidConfig, std::string("missing --") + what);
  if (!fs::exists(path)) throw Error(ErrorCode::IoError, std::string(what) + " not found: " + path);
}

StampedPose first_pose(const std::string& path) {
  const auto poses = io::read_tum(path);
  if (poses.empty()) throw Error(ErrorCode::EmptyInput, path + " holds no pose");
  return poses.front();
}

std::vector<CameraFrame> load_frames(const std::string& frames_csv) {
  const fs::path images = fs::path(frames_csv).parent_path() / "images";
  std::vector<CameraFrame> frames;
  for (const auto& r : io::read_frames_csv(frames_csv)) {
    CameraFrame f;
    f.index = r.index;
    f.timestamp = r.timestamp;
    f.true_pose = r.true_pose;
    const fs::path img = images / (std::to_string(r.index) + ".pgm");
    if (fs::exists(img)) f.image = io::read_pgm(img);
    frames.push_back(std::move(f));
  }
  return frames;
}

std::vector<Vec3> cloud_positions(const PointCloud& cloud) {
  std::vector<Vec3> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud) out.push_back(p.position);
  return out;
}

}  // namespace

int run_simulate(const SimulateArgs& a) {
  Scenario s = Scenario::default_corridor();
  if (!a.scenario.empty()) {
    require_file(a.scenario, "scenario");
    s = scenario_from_json(read_json_file(a.scenario));
  }
  const fs::path out(a.out);
  fs::create_directories(out / "correspondences");
  SyntheticData d = simulate(s, a.render_images);

  write_text(out / "scenario.json", scenario_to_json(s).dump(2) + "\n");
  io::write_ply(out / "landmarks.ply", d.world.landmarks);
  io::write_tum(out / "groundtruth.tum", d.world.ground_truth());
  io::write_imu_csv(out / "imu.csv", d.imu);
  io::write_speed_csv(out / "speed.csv", d.speed);
  io::write_intrinsics_json(out / "intrinsics.json", s.rig.intrinsics);
  save_map(d.map, out / "map");

  std::vector<io::FrameRecord> records;
  std::vector<StampedPose> odometry;
  SyntheticMatcher matcher = make_matcher(s, d.world);
  if (a.render_images) fs::create_directories(out / "images");
  for (const auto& f : d.frames) {
    records.push_back({f.index, f.timestamp, f.true_pose});
    odometry.push_back({f.timestamp, truth_at(d.world, f.timestamp)});
    if (a.render_images) io::write_pgm(out / "images" / (std::to_string(f.index) + ".pgm"), f.image);
    const TopoNode& node = d.map.nearest_node(f.true_pose->translation);
    io::RecordedMatches rec;
    rec.node_id = node.node_id;
    try {
      const MatchView cur{&f.image, nullptr, f.true_pose, f.timestamp};
      const MatchView ref{&node.image, &node.depth, node.pose, node.timestamp};
      rec.pairs = matcher.match(cur, ref).pairs;
    } catch (const Error& e) {
      LOG(WARNING) << "frame " << f.index << ": " << e.what();
    }
    io::write_correspondence_csv(out / "correspondences" / (std::to_string(f.index) + ".csv"), rec);
  }
  io::write_frames_csv(out / "frames.csv", records);
  io::write_tum(out / "odometry.tum", odometry);
  const double t_init = d.imu.front().timestamp + a.init_window_s;
  io::write_tum(out / "initial_pose.tum", {{t_init, truth_at(d.world, t_init)}});
  io::write_tum(out / "initial_camera_pose.tum", {{d.frames.front().timestamp, *d.frames.front().true_pose}});
  std::cout << "simulated " << d.frames.size() << " frames, " << d.world.landmarks.size() << " landmarks, "
            << d.map.size() << " map nodes into " << out.string() << "\n";
  return 0;
}

int run_mapgen(const MapgenArgs& a) {
  require_file(a.cloud, "cloud");
  require_file(a.frames, "frames");
  require_file(a.odometry, "odometry");
  require_file(a.intrinsics, "intrinsics");
  require_file(a.initial_pose, "initial-pose");
  const PointCloud cloud = io::read_ply(a.cloud);
  const std::vector<CameraFrame> frames = load_frames(a.frames);
  for (const auto& f : frames) {
    if (!f.true_pose) {
      throw Error(ErrorCode::InvalidConfig, "synthetic matching needs true camera poses in " + a.frames);
    }
  }
  const CameraIntrinsics intr = io::read_intrinsics_json(a.intrinsics);
  OdometrySequence odo;
  odo.poses = io::read_tum(a.odometry);
  odo.camera_to_baseline = Extrinsics::forward_camera().imu_to_camera().inverse();
  const Pose initial = first_pose(a.initial_pose).pose;

  SyntheticMatchOptions opt;
  opt.sigma_px = a.sigma_px;
  opt.outlier_fraction = a.outlier_fraction;
  SyntheticMatcher matcher(cloud_positions(cloud), intr, opt, a.seed);
  const MapGenResult res = generate_map(cloud, frames, odo, initial, intr, matcher);
  save_map(res.map, a.out);
  size_t accepted = 0;
  for (const auto& r : res.frames) accepted += r.accepted ? 1 : 0;
  std::cout << "accepted " << accepted << " of " << res.frames.size() << " frames into " << a.out << "\n";
  return 0;
}

int run_localize(const LocalizeArgs& a) {
  if (a.out.empty()) throw Error(ErrorCode::InvalidConfig, "missing --out");
  require_file(a.imu, "imu");
  require_file(a.frames, "frames");
  require_file(a.initial_pose, "initial-pose");
  FilterParams params;
  if (!a.config.empty()) {
    require_file(a.config, "config");
    params = filter_params_from_json(read_json_file(a.config));
  }
  if (a.no_speed) params.use_speed = false;

  TopologicalMap map;
  std::unique_ptr<Matcher> matcher;
  if (!a.dead_reckoning) {
    if (a.map.empty()) throw Error(ErrorCode::InvalidConfig, "missing --map");
    if (!fs::is_directory(a.map)) throw Error(ErrorCode::IoError, "map directory not found: " + a.map);
    map = load_map(a.map);
  }
  const auto imu = io::read_imu_csv(a.imu);
  std::vector<SpeedSample> speed;
  if (!a.speed.empty()) {
    require_file(a.speed, "speed");
    speed = io::read_speed_csv(a.speed);
  }
  const std::vector<CameraFrame> frames = load_frames(a.frames);
  if (!a.dead_reckoning) {
    if (!a.correspondences.empty()) {
      if (!fs::is_directory(a.correspondences)) {
        throw Error(ErrorCode::IoError, "correspondence directory not found: " + a.correspondences);
      }
      auto replay = std::make_unique<ReplayMatcher>();
      for (const auto& f : frames) {
        const fs::path p = fs::path(a.correspondences) / (std::to_string(f.index) + ".csv");
        if (fs::exists(p)) replay->add(f.timestamp, io::read_correspondence_csv(p));
      }
      matcher = std::move(replay);
    } else if (!a.landmarks.empty()) {
      require_file(a.landmarks, "landmarks");
      SyntheticMatchOptions opt;
      opt.sigma_px = a.sigma_px;
      opt.outlier_fraction = a.outlier_fraction;
      matcher = std::make_unique<SyntheticMatcher>(cloud_positions(io::read_ply(a.landmarks)), map.intrinsics(),
                                                   opt, a.seed);
    } else {
      throw Error(ErrorCode::InvalidConfig, "localize needs --correspondences or --landmarks (or --dead-reckoning)");
    }
  }
  if (imu.empty()) throw Error(ErrorCode::EmptyInput, a.imu + " holds no samples");
  const StampedPose init = first_pose(a.initial_pose);
  RunOptions opt;
  opt.filter = params;
  opt.init_window_s = init.timestamp - imu.front().timestamp;
  opt.use_map = !a.dead_reckoning;
  const LocalizationRun run = run_localization(opt.use_map ? &map : nullptr, matcher.get(),
                                               Extrinsics::forward_camera(), imu, speed, frames, init.pose, opt);
  io::write_tum(a.out, run.estimate);
  if (!a.diagnostics.empty()) {
    std::ofstream diag(a.diagnostics, std::ios::binary);
    if (!diag) throw Error(ErrorCode::IoError, "cannot write " + a.diagnostics);
    for (const auto& d : run.diagnostics) diag << to_json_line(d) << "\n";
  }
  std::cout << "localized " << run.estimate.size() << " frames into " << a.out << "\n";
  return 0;
}

namespace {

ApeReport evaluate(const EvalArgs& a) {
  require_file(a.estimate, "estimate");
  require_file(a.truth, "truth");
  return ape(Trajectory(io::read_tum(a.estimate)), Trajectory(io::read_tum(a.truth)), a.max_dt);
}

}  // namespace

int run_eval(const EvalArgs& a) {
  const ApeReport rep = evaluate(a);
  const std::string text = ape_report_json(rep) + "\n";
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_text(a.out, text);
    std::cout << "APEt " << rep.ape_t_m << " m, APEr " << rep.ape_r_rad << " rad over " << rep.n_pairs
              << " poses\n";
  }
  return 0;
}

int run_plot_data(const EvalArgs& a) {
  if (a.out.empty()) throw Error(ErrorCode::InvalidConfig, "missing --out");
  write_error_csv(a.out, evaluate(a));
  return 0;
}

}  // namespace topoloc::cli
