#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "topoloc/geometry.hpp"
#include "topoloc/io.hpp"
#include "topoloc/matching.hpp"
#include "topoloc/state.hpp"

namespace topoloc {

/// Continuous-time process noise densities and measurement covariances.
struct NoiseParams {
  double n_theta = 2e-3;   ///< gyro white noise, rad/s/sqrt(Hz)
  double n_v = 2e-2;       ///< accel white noise, m/s^2/sqrt(Hz)
  double n_bias_acc = 1e-3;
  double n_bias_gyro = 1e-4;
  double r_feature = 1.5 * 1.5;  ///< px^2
  double r_speed = 0.3 * 0.3;    ///< (m/s)^2
};

/// q_cam = r_ic * q_imu + p_ic
struct Extrinsics {
  Rotation r_ic;
  Vec3 p_ic = Vec3::Zero();

  /// Camera looking along the body x axis with image x to body -y and image
  /// y to body -z.
  static Extrinsics forward_camera();
  /// Maps IMU-frame points into the camera frame.
  Pose imu_to_camera() const { return Pose{r_ic, p_ic}; }
  /// Camera-in-global pose for an IMU-in-global pose.
  Pose camera_pose(const Pose& imu_pose) const { return imu_pose * imu_to_camera().inverse(); }
  Pose imu_pose(const Pose& camera_pose) const { return camera_pose * imu_to_camera(); }
};

struct FilterParams {
  NoiseParams noise;
  double epsilon = 1e-6;
  int kappa_max = 5;
  size_t min_features = 8;
  double sigma_th_px = 2.0;
  double min_depth_m = 0.1;
  /// Keep g fixed: the gravity block is excluded from updates and carries no
  /// covariance.
  bool freeze_gravity = false;
  bool use_speed = true;
  /// Nodes farther than this from the predicted camera are not matched.
  double max_node_distance_m = std::numeric_limits<double>::infinity();
};

struct FilterState {
  NominalState x;
  Covariance P = Covariance::Identity();
};

/// Nominal discrete model (zero-order hold on the sample over dt):
/// R' = R exp((w_m - b_w) dt), a = R (a_m - b_a) + g,
/// p' = p + v dt + a dt^2 / 2, v' = v + a dt.
NominalState nominal_transition(const NominalState& x, const ImuSample& imu, double dt);

/// Jacobian of the error state after nominal_transition with respect to the
/// error state before it.
Covariance transition_jacobian(const NominalState& x, const ImuSample& imu, double dt);

/// One step of P' = F_x P F_x^T + F_n Q_n F_n^T. dt must lie in (0, 0.1].
/// Throws NonFiniteInput or NonPositiveDt.
FilterState propagate(const FilterState& s, const ImuSample& imu, double dt, const NoiseParams& noise,
                      bool freeze_gravity = false);

/// z = project(r_ic R^T (m - p) + p_ic) - f. Throws PointBehindCamera when the
/// camera-frame depth is not above min_depth.
Vec2 residual_feature(const NominalState& x, const Vec3& m, const ImagePoint& f, const Extrinsics& extr,
                      const CameraIntrinsics& intr, double min_depth = 0.1);
Eigen::Matrix<double, 2, kStateDim> jacobian_feature(const NominalState& x, const Vec3& m,
                                                     const Extrinsics& extr, const CameraIntrinsics& intr,
                                                     double min_depth = 0.1);

/// z_v = R (v_x, 0, 0) - v
Vec3 residual_speed(const NominalState& x, const SpeedSample& sample);
Eigen::Matrix<double, 3, kStateDim> jacobian_speed(const NominalState& x, const SpeedSample& sample);

struct UpdateDiagnostics {
  int iterations = 0;
  bool converged = false;
  size_t n_features = 0;  ///< features used in the stacked system
  size_t n_behind = 0;    ///< features excluded for lying behind the camera
  bool speed_used = false;
  /// MAP cost: prior Mahalanobis term plus whitened residual norm.
  double cost0 = 0.0;
  double cost_final = 0.0;
  std::vector<double> cost_history;  ///< at each iterate, starting with the prediction
};

struct UpdateResult {
  FilterState state;
  UpdateDiagnostics diagnostics;
};

/// Iterated MAP update around the prediction with stacked feature and speed
/// measurements. Throws NoMeasurements or SingularNormalMatrix.
UpdateResult iterated_update(const FilterState& predicted, const Matched3D2D& matches,
                             const std::optional<SpeedSample>& speed, const Extrinsics& extr,
                             const CameraIntrinsics& intr, const FilterParams& params);

/// Standard deviations of the initial covariance.
struct InitPriors {
  double sigma_theta = 0.01;
  double sigma_p = 0.05;
  double sigma_v = 0.1;
  double sigma_bias_acc = 0.05;
  double sigma_bias_gyro = 5e-3;
  double sigma_gravity = 0.05;
};

/// Filter state from a known IMU pose and a window of IMU samples with no
/// acceleration or rotation. The vehicle may be moving at constant velocity
/// during the window; initial_speed sets v = R (initial_speed, 0, 0).
/// Throws InsufficientStationaryData when the window spans less than
/// min_window_s.
FilterState initialize(const Pose& imu_pose, const std::vector<ImuSample>& window,
                       const InitPriors& priors = {}, double initial_speed = 0.0,
                       double min_window_s = 0.5);

/// (P + P^T) / 2
void symmetrize(Covariance& p);

}  // namespace topoloc
