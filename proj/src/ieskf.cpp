#include "topoloc/ieskf.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "topoloc/error.hpp"

namespace topoloc {

namespace {

bool finite(const Vec3& v) { return v.allFinite(); }

constexpr double kMaxDt = 0.1;

}  // namespace

Extrinsics Extrinsics::forward_camera() {
  Mat3 r;
  r << 0.0, -1.0, 0.0,  //
      0.0, 0.0, -1.0,   //
      1.0, 0.0, 0.0;
  return Extrinsics{Rotation::from_matrix(r), Vec3::Zero()};
}

void symmetrize(Covariance& p) { p = 0.5 * (p + p.transpose()).eval(); }

NominalState nominal_transition(const NominalState& x, const ImuSample& imu, double dt) {
  NominalState out = x;
  const Vec3 w = imu.gyro - x.bias_gyro;
  const Vec3 a_world = x.rotation * (imu.acc - x.bias_acc) + x.gravity;
  out.rotation = x.rotation * so3_exp(w * dt);
  out.position = x.position + x.velocity * dt + 0.5 * a_world * dt * dt;
  out.velocity = x.velocity + a_world * dt;
  return out;
}

Covariance transition_jacobian(const NominalState& x, const ImuSample& imu, double dt) {
  using namespace block;
  const Vec3 w_dt = (imu.gyro - x.bias_gyro) * dt;
  const Vec3 a = imu.acc - x.bias_acc;
  const Mat3 r = x.rotation.matrix();
  const Mat3 i3 = Mat3::Identity();
  const Mat3 dv_dtheta = -r * skew(a) * dt;  // B
  const Mat3 dv_dba = -r * dt;

  Covariance f = Covariance::Identity();
  f.block<3, 3>(kTheta, kTheta) = so3_exp(w_dt).matrix().transpose();  // A
  f.block<3, 3>(kTheta, kBiasGyro) = -so3_right_jacobian(w_dt) * dt;

  f.block<3, 3>(kPos, kTheta) = 0.5 * dv_dtheta * dt;
  f.block<3, 3>(kPos, kVel) = i3 * dt;
  f.block<3, 3>(kPos, kBiasAcc) = 0.5 * dv_dba * dt;
  f.block<3, 3>(kPos, kGravity) = 0.5 * i3 * dt * dt;

  f.block<3, 3>(kVel, kTheta) = dv_dtheta;
  f.block<3, 3>(kVel, kBiasAcc) = dv_dba;
  f.block<3, 3>(kVel, kGravity) = i3 * dt;
  return f;
}

FilterState propagate(const FilterState& s, const ImuSample& imu, double dt, const NoiseParams& noise,
                      bool freeze_gravity) {
  if (!std::isfinite(dt) || !finite(imu.acc) || !finite(imu.gyro)) {
    throw Error(ErrorCode::NonFiniteInput, "IMU sample or dt is not finite");
  }
  if (dt <= 0.0 || dt > kMaxDt) {
    throw Error(ErrorCode::NonPositiveDt, "propagation dt " + std::to_string(dt) + " outside (0, 0.1]");
  }
  using namespace block;
  const Covariance f = transition_jacobian(s.x, imu, dt);
  FilterState out;
  out.x = nominal_transition(s.x, imu, dt);
  out.P = f * s.P * f.transpose();
  // F_n places each isotropic noise term directly on its error block.
  out.P.block<3, 3>(kTheta, kTheta).diagonal().array() += noise.n_theta * noise.n_theta * dt;
  out.P.block<3, 3>(kVel, kVel).diagonal().array() += noise.n_v * noise.n_v * dt;
  out.P.block<3, 3>(kBiasAcc, kBiasAcc).diagonal().array() += noise.n_bias_acc * noise.n_bias_acc * dt;
  out.P.block<3, 3>(kBiasGyro, kBiasGyro).diagonal().array() += noise.n_bias_gyro * noise.n_bias_gyro * dt;
  if (freeze_gravity) {
    out.P.middleRows<3>(kGravity).setZero();
    out.P.middleCols<3>(kGravity).setZero();
  }
  symmetrize(out.P);
  return out;
}

namespace {

Vec3 camera_point(const NominalState& x, const Vec3& m, const Extrinsics& extr) {
  return extr.r_ic * (x.rotation.inverse() * (m - x.position)) + extr.p_ic;
}

}  // namespace

Vec2 residual_feature(const NominalState& x, const Vec3& m, const ImagePoint& f, const Extrinsics& extr,
                      const CameraIntrinsics& intr, double min_depth) {
  const Vec3 q = camera_point(x, m, extr);
  if (!(q.z() > min_depth)) {
    throw Error(ErrorCode::PointBehindCamera, "map point depth " + std::to_string(q.z()) + " in camera");
  }
  return project(intr, q).vec() - f.vec();
}

Eigen::Matrix<double, 2, kStateDim> jacobian_feature(const NominalState& x, const Vec3& m,
                                                     const Extrinsics& extr, const CameraIntrinsics& intr,
                                                     double min_depth) {
  const Vec3 q = camera_point(x, m, extr);
  if (!(q.z() > min_depth)) {
    throw Error(ErrorCode::PointBehindCamera, "map point depth " + std::to_string(q.z()) + " in camera");
  }
  const Mat3 rt = x.rotation.matrix().transpose();
  const Mat3 ric = extr.r_ic.matrix();
  const Eigen::Matrix<double, 2, 3> dh_dq = projection_jacobian(intr, q);
  Eigen::Matrix<double, 2, kStateDim> h = Eigen::Matrix<double, 2, kStateDim>::Zero();
  h.block<2, 3>(0, block::kTheta) = dh_dq * ric * skew(rt * (m - x.position));
  h.block<2, 3>(0, block::kPos) = -dh_dq * ric * rt;
  return h;
}

Vec3 residual_speed(const NominalState& x, const SpeedSample& sample) {
  return x.rotation * Vec3(sample.vx, 0.0, 0.0) - x.velocity;
}

Eigen::Matrix<double, 3, kStateDim> jacobian_speed(const NominalState& x, const SpeedSample& sample) {
  Eigen::Matrix<double, 3, kStateDim> h = Eigen::Matrix<double, 3, kStateDim>::Zero();
  h.block<3, 3>(0, block::kTheta) = -x.rotation.matrix() * skew(Vec3(sample.vx, 0.0, 0.0));
  h.block<3, 3>(0, block::kVel) = -Mat3::Identity();
  return h;
}

namespace {

struct Stacked {
  Eigen::VectorXd z;
  Eigen::MatrixXd h;
  Eigen::VectorXd r_inv;  ///< diagonal of R^-1
  size_t n_features = 0;
  size_t n_behind = 0;
};

Stacked stack(const NominalState& x, const Matched3D2D& matches, const std::optional<SpeedSample>& speed,
              const Extrinsics& extr, const CameraIntrinsics& intr, const FilterParams& params) {
  std::vector<size_t> usable;
  usable.reserve(matches.size());
  for (size_t i = 0; i < matches.size(); ++i) {
    const Vec3 q = camera_point(x, matches.matches[i].point, extr);
    if (q.z() > params.min_depth_m) usable.push_back(i);
  }
  const auto rows = static_cast<Eigen::Index>(2 * usable.size() + (speed ? 3 : 0));
  Stacked s;
  s.z.resize(rows);
  s.h.resize(rows, kStateDim);
  s.r_inv.resize(rows);
  s.n_features = usable.size();
  s.n_behind = matches.size() - usable.size();
  Eigen::Index row = 0;
  for (size_t i : usable) {
    const auto& pf = matches.matches[i];
    s.z.segment<2>(row) = residual_feature(x, pf.point, pf.feature, extr, intr, params.min_depth_m);
    s.h.middleRows<2>(row) = jacobian_feature(x, pf.point, extr, intr, params.min_depth_m);
    s.r_inv.segment<2>(row).setConstant(1.0 / params.noise.r_feature);
    row += 2;
  }
  if (speed) {
    s.z.segment<3>(row) = residual_speed(x, *speed);
    s.h.middleRows<3>(row) = jacobian_speed(x, *speed);
    s.r_inv.segment<3>(row).setConstant(1.0 / params.noise.r_speed);
  }
  return s;
}

Eigen::VectorXd take(const ErrorState& v, int n) { return v.head(n); }

}  // namespace

UpdateResult iterated_update(const FilterState& predicted, const Matched3D2D& matches,
                             const std::optional<SpeedSample>& speed_sample, const Extrinsics& extr,
                             const CameraIntrinsics& intr, const FilterParams& params) {
  const std::optional<SpeedSample> speed = params.use_speed ? speed_sample : std::nullopt;
  if (params.kappa_max < 1) {
    throw Error(ErrorCode::InvalidConfig, "kappa_max must be at least 1");
  }
  if (matches.empty() && !speed) {
    throw Error(ErrorCode::NoMeasurements, "update needs at least one feature or a speed sample");
  }
  // Gravity is the trailing block, so freezing it just truncates the system.
  const int n = params.freeze_gravity ? block::kGravity : kStateDim;
  const NominalState& x_pred = predicted.x;
  const Eigen::MatrixXd p_pred = predicted.P.topLeftCorner(n, n);
  const Eigen::LLT<Eigen::MatrixXd> p_pred_llt(p_pred);
  if (p_pred_llt.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularNormalMatrix, "predicted covariance is not positive definite");
  }

  auto map_cost = [&](const NominalState& x, const Stacked& s) {
    const Eigen::VectorXd d = take(box_minus(x, x_pred), n);
    const double prior = d.dot(p_pred_llt.solve(d));
    return prior + s.z.dot(s.r_inv.cwiseProduct(s.z));
  };

  UpdateResult res;
  auto& diag = res.diagnostics;
  NominalState xk = x_pred;
  Stacked st = stack(xk, matches, speed, extr, intr, params);
  if (st.z.size() == 0) {
    throw Error(ErrorCode::NoMeasurements, "every feature lies behind the camera");
  }
  diag.n_features = st.n_features;
  diag.n_behind = st.n_behind;
  diag.speed_used = speed.has_value();
  diag.cost0 = map_cost(xk, st);
  diag.cost_history.push_back(diag.cost0);

  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd k_gain;
  Eigen::MatrixXd h;
  Eigen::MatrixXd p;
  for (int kappa = 0; kappa < params.kappa_max; ++kappa) {
    const Eigen::VectorXd d = take(box_minus(xk, x_pred), n);
    Eigen::MatrixXd j_inv = eye;
    j_inv.topLeftCorner<3, 3>() = so3_right_jacobian(d.head<3>());
    p = j_inv * p_pred * j_inv.transpose();
    const Eigen::LLT<Eigen::MatrixXd> p_llt(p);
    if (p_llt.info() != Eigen::Success) {
      throw Error(ErrorCode::SingularNormalMatrix, "iterate covariance is not positive definite");
    }
    h = st.h.leftCols(n);
    const Eigen::MatrixXd ht_rinv = h.transpose() * st.r_inv.asDiagonal();
    const Eigen::MatrixXd normal = ht_rinv * h + p_llt.solve(eye);
    const Eigen::LLT<Eigen::MatrixXd> normal_llt(normal);
    if (normal_llt.info() != Eigen::Success) {
      throw Error(ErrorCode::SingularNormalMatrix, "H^T R^-1 H + P^-1 is not positive definite");
    }
    k_gain = normal_llt.solve(ht_rinv);
    const Eigen::VectorXd dx = -k_gain * st.z - (eye - k_gain * h) * j_inv * d;
    if (!dx.allFinite()) {
      throw Error(ErrorCode::SingularNormalMatrix, "update step is not finite");
    }
    ErrorState dx_full = ErrorState::Zero();
    dx_full.head(n) = dx;
    const NominalState x_next = box_plus(xk, dx_full);
    const double step = box_minus(x_next, xk).norm();
    xk = x_next;
    diag.iterations = kappa + 1;
    st = stack(xk, matches, speed, extr, intr, params);
    diag.cost_history.push_back(map_cost(xk, st));
    if (step < params.epsilon) {
      diag.converged = true;
      break;
    }
    if (st.z.size() == 0) break;
  }
  diag.cost_final = diag.cost_history.back();

  res.state.x = xk;
  res.state.P = predicted.P;
  res.state.P.topLeftCorner(n, n) = (eye - k_gain * h) * p;
  symmetrize(res.state.P);
  return res;
}

FilterState initialize(const Pose& imu_pose, const std::vector<ImuSample>& window, const InitPriors& priors,
                       double initial_speed, double min_window_s) {
  // Each sample covers the interval to its successor; the last one gets the
  // mean spacing.
  double span = 0.0;
  if (window.size() >= 2) {
    const double covered = window.back().timestamp - window.front().timestamp;
    span = covered * static_cast<double>(window.size()) / static_cast<double>(window.size() - 1);
  }
  if (span < min_window_s - 1e-9) {
    throw Error(ErrorCode::InsufficientStationaryData,
                "stationary window covers " + std::to_string(span) + " s, need " + std::to_string(min_window_s));
  }
  Vec3 acc_world = Vec3::Zero();
  Vec3 gyro = Vec3::Zero();
  double norm = 0.0;
  for (const auto& s : window) {
    if (!finite(s.acc) || !finite(s.gyro)) {
      throw Error(ErrorCode::NonFiniteInput, "non-finite IMU sample in initialization window");
    }
    acc_world += imu_pose.rotation * s.acc;
    gyro += s.gyro;
    norm += s.acc.norm();
  }
  const double cnt = static_cast<double>(window.size());
  acc_world /= cnt;
  norm /= cnt;

  FilterState out;
  out.x.rotation = imu_pose.rotation;
  out.x.position = imu_pose.translation;
  out.x.velocity = imu_pose.rotation * Vec3(initial_speed, 0.0, 0.0);
  out.x.bias_acc = Vec3::Zero();
  out.x.bias_gyro = gyro / cnt;
  out.x.gravity = -acc_world.normalized() * norm;

  using namespace block;
  out.P = Covariance::Zero();
  auto set = [&](int b, double sigma) { out.P.block<3, 3>(b, b).diagonal().setConstant(sigma * sigma); };
  set(kTheta, priors.sigma_theta);
  set(kPos, priors.sigma_p);
  set(kVel, priors.sigma_v);
  set(kBiasAcc, priors.sigma_bias_acc);
  set(kBiasGyro, priors.sigma_bias_gyro);
  set(kGravity, priors.sigma_gravity);
  return out;
}

}  // namespace topoloc
