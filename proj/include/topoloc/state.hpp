#pragma once

#include <Eigen/Core>

#include "topoloc/geometry.hpp"

namespace topoloc {

constexpr int kStateDim = 18;

/// Offsets of each block inside ErrorState and Covariance.
namespace block {
constexpr int kTheta = 0;
constexpr int kPos = 3;
constexpr int kVel = 6;
constexpr int kBiasAcc = 9;
constexpr int kBiasGyro = 12;
constexpr int kGravity = 15;
}  // namespace block

using ErrorState = Eigen::Matrix<double, kStateDim, 1>;
using Covariance = Eigen::Matrix<double, kStateDim, kStateDim>;

/// Filter state on SO(3) x R^15. rotation/position/velocity describe the IMU
/// frame in the global frame.
struct NominalState {
  Rotation rotation;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 bias_acc = Vec3::Zero();
  Vec3 bias_gyro = Vec3::Zero();
  Vec3 gravity{0.0, 0.0, -9.81};

  Pose pose() const { return Pose{rotation, position}; }
};

/// R <- R * exp(d_theta); every vector block added componentwise.
NominalState box_plus(const NominalState& x, const ErrorState& dx);
/// Inverse of box_plus: box_minus(box_plus(x, d), x) == d.
ErrorState box_minus(const NominalState& x1, const NominalState& x2);

}  // namespace topoloc
