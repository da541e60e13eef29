#pragma once

#include <string>

namespace topoloc::cli {

struct SimulateArgs {
  std::string scenario;
  std::string out;
  bool render_images = false;
  double init_window_s = 0.5;
};

struct MapgenArgs {
  std::string cloud;
  std::string frames;
  std::string odometry;
  std::string intrinsics;
  std::string initial_pose;
  std::string out;
  double sigma_px = 0.0;
  double outlier_fraction = 0.0;
  unsigned long long seed = 42;
};

struct LocalizeArgs {
  std::string map;
  std::string imu;
  std::string speed;
  std::string frames;
  std::string correspondences;
  std::string landmarks;
  std::string initial_pose;
  std::string config;
  std::string out;
  std::string diagnostics;
  bool no_speed = false;
  bool dead_reckoning = false;
  double sigma_px = 1.0;
  double outlier_fraction = 0.0;
  unsigned long long seed = 42;
};

struct EvalArgs {
  std::string estimate;
  std::string truth;
  std::string out;
  double max_dt = 0.01;
};

int run_simulate(const SimulateArgs& a);
int run_mapgen(const MapgenArgs& a);
int run_localize(const LocalizeArgs& a);
int run_eval(const EvalArgs& a);
int run_plot_data(const EvalArgs& a);

}  // namespace topoloc::cli
