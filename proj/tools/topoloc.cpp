#include <glog/logging.h>

#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "topoloc/error.hpp"

namespace {

bool is_input_error(topoloc::ErrorCode c) {
  using topoloc::ErrorCode;
  switch (c) {
    case ErrorCode::IoError:
    case ErrorCode::ParseError:
    case ErrorCode::InvalidConfig:
    case ErrorCode::FormatVersionMismatch:
    case ErrorCode::ChecksumMismatch:
    case ErrorCode::NoTimestampOverlap:
    case ErrorCode::DuplicateTimestamp:
    case ErrorCode::EmptyInput:
    case ErrorCode::InvalidIntrinsics:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::EmptyCloud:
    case ErrorCode::EmptyMap:
    case ErrorCode::MissingOdometry:
    case ErrorCode::InsufficientStationaryData:
      return true;
    default:
      return false;
  }
}

}  // namespace

int main(int argc, char** argv) {
  google::InitGoogleLogging(argv[0]);
  FLAGS_logtostderr = true;

  using namespace topoloc::cli;
  CLI::App app{"Map-based visual-inertial localization toolkit"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Generate a synthetic world, sensor streams and map bundle");
  c_sim->add_option("--scenario", sim.scenario, "Scenario JSON (defaults to the 60 s corridor)");
  c_sim->add_option("--out", sim.out, "Output directory")->required();
  c_sim->add_flag("--render-images", sim.render_images, "Also write rendered frame images");
  c_sim->add_option("--init-window", sim.init_window_s, "Initialization window written to initial_pose.tum (s)");

  MapgenArgs mg;
  auto* c_mg = app.add_subcommand("mapgen", "Compile a topological map from a point cloud and camera frames");
  c_mg->add_option("--cloud", mg.cloud, "Point cloud PLY")->required();
  c_mg->add_option("--frames", mg.frames, "frames.csv with true camera poses")->required();
  c_mg->add_option("--odometry", mg.odometry, "IMU-frame odometry TUM, one pose per frame")->required();
  c_mg->add_option("--intrinsics", mg.intrinsics, "Intrinsics JSON")->required();
  c_mg->add_option("--initial-pose", mg.initial_pose, "TUM file with the first camera pose")->required();
  c_mg->add_option("--out", mg.out, "Map bundle directory")->required();
  c_mg->add_option("--sigma-px", mg.sigma_px, "Synthetic matcher pixel noise");
  c_mg->add_option("--outlier-fraction", mg.outlier_fraction, "Synthetic matcher outlier fraction");
  c_mg->add_option("--seed", mg.seed, "Synthetic matcher seed");

  LocalizeArgs lo;
  auto* c_lo = app.add_subcommand("localize", "Run the filter against a map bundle");
  c_lo->add_option("--map", lo.map, "Map bundle directory");
  c_lo->add_option("--imu", lo.imu, "IMU CSV")->required();
  c_lo->add_option("--speed", lo.speed, "Speed CSV");
  c_lo->add_option("--frames", lo.frames, "frames.csv")->required();
  c_lo->add_option("--correspondences", lo.correspondences, "Directory of recorded <index>.csv matches");
  c_lo->add_option("--landmarks", lo.landmarks, "Landmark PLY for the synthetic matcher");
  c_lo->add_option("--initial-pose", lo.initial_pose, "TUM file with the IMU pose at the end of the init window")
      ->required();
  c_lo->add_option("--config", lo.config, "Filter config JSON");
  c_lo->add_option("--out", lo.out, "Estimated trajectory (TUM)")->required();
  c_lo->add_option("--diagnostics", lo.diagnostics, "Per-frame diagnostics (JSON lines)");
  c_lo->add_flag("--no-speed", lo.no_speed, "Ignore speed measurements");
  c_lo->add_flag("--dead-reckoning", lo.dead_reckoning, "Skip map matching entirely");
  c_lo->add_option("--sigma-px", lo.sigma_px, "Synthetic matcher pixel noise");
  c_lo->add_option("--outlier-fraction", lo.outlier_fraction, "Synthetic matcher outlier fraction");
  c_lo->add_option("--seed", lo.seed, "Synthetic matcher seed");

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "Absolute pose error report (JSON)");
  c_ev->add_option("--estimate", ev.estimate, "Estimated TUM trajectory")->required();
  c_ev->add_option("--truth", ev.truth, "Ground-truth TUM trajectory")->required();
  c_ev->add_option("--out", ev.out, "Report path (stdout when omitted)");
  c_ev->add_option("--max-dt", ev.max_dt, "Association tolerance (s)");

  EvalArgs pd;
  auto* c_pd = app.add_subcommand("plot-data", "Per-frame error CSV");
  c_pd->add_option("--estimate", pd.estimate, "Estimated TUM trajectory")->required();
  c_pd->add_option("--truth", pd.truth, "Ground-truth TUM trajectory")->required();
  c_pd->add_option("--out", pd.out, "CSV path")->required();
  c_pd->add_option("--max-dt", pd.max_dt, "Association tolerance (s)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (c_sim->parsed()) return run_simulate(sim);
    if (c_mg->parsed()) return run_mapgen(mg);
    if (c_lo->parsed()) return run_localize(lo);
    if (c_ev->parsed()) return run_eval(ev);
    if (c_pd->parsed()) return run_plot_data(pd);
  } catch (const topoloc::Error& e) {
    std::cerr << "error [" << topoloc::to_string(e.code()) << "]: " << e.what() << "\n";
    return is_input_error(e.code()) ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
