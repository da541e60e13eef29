#include "topoloc/geometry.hpp"

#include <cmath>

#include "topoloc/error.hpp"

namespace topoloc {

namespace {
constexpr double kSmallAngle = 1e-8;
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

Rotation Rotation::from_quaternion(const Eigen::Quaterniond& q) {
  const double n = q.norm();
  if (!std::isfinite(n) || n == 0.0) {
    throw Error(ErrorCode::NonFiniteInput, "quaternion with zero or non-finite norm");
  }
  if (std::abs(n - 1.0) <= 1e-15) {
    return Rotation(q);
  }
  return Rotation(Eigen::Quaterniond(q.coeffs() / n));
}

Rotation Rotation::from_matrix(const Mat3& m) {
  // Project onto SO(3) first so slightly non-orthogonal inputs stay valid.
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return from_quaternion(Eigen::Quaterniond(r));
}

Rotation Rotation::inverse() const { return Rotation(q_.conjugate()); }

Rotation Rotation::operator*(const Rotation& other) const {
  Eigen::Quaterniond q = q_ * other.q_;
  q.normalize();
  return Rotation(q);
}

Rotation so3_exp(const Vec3& theta) {
  const double angle = theta.norm();
  Eigen::Quaterniond q;
  if (angle < kSmallAngle) {
    const double a2 = angle * angle;
    q.w() = 1.0 - a2 / 8.0;
    q.vec() = 0.5 * (1.0 - a2 / 24.0) * theta;
  } else {
    const double half = 0.5 * angle;
    q.w() = std::cos(half);
    q.vec() = (std::sin(half) / angle) * theta;
  }
  q.normalize();
  return Rotation::from_quaternion(q);
}

Vec3 so3_log(const Rotation& r) {
  Eigen::Quaterniond q = r.quaternion();
  if (q.w() < 0.0) {
    q.coeffs() = -q.coeffs();
  }
  const double sin_half = q.vec().norm();
  if (sin_half < 0.5 * kSmallAngle) {
    // atan2(s, w) / s ~= (1 - s^2 / (3 w^2)) / w
    const double w = q.w();
    return 2.0 * (1.0 - sin_half * sin_half / (3.0 * w * w)) / w * q.vec();
  }
  const double angle = 2.0 * std::atan2(sin_half, q.w());
  return (angle / sin_half) * q.vec();
}

Mat3 so3_right_jacobian(const Vec3& theta) {
  const double t = theta.norm();
  const Mat3 k = skew(theta);
  if (t < 1e-5) {
    return Mat3::Identity() - 0.5 * k + (1.0 / 6.0) * k * k;
  }
  const double t2 = t * t;
  return Mat3::Identity() - (1.0 - std::cos(t)) / t2 * k + (t - std::sin(t)) / (t2 * t) * k * k;
}

Mat3 so3_right_jacobian_inverse(const Vec3& theta) {
  const double t = theta.norm();
  const Mat3 k = skew(theta);
  if (t < 1e-5) {
    return Mat3::Identity() + 0.5 * k + (1.0 / 12.0) * k * k;
  }
  const double coeff = 1.0 / (t * t) - (1.0 + std::cos(t)) / (2.0 * t * std::sin(t));
  return Mat3::Identity() + 0.5 * k + coeff * k * k;
}

Pose Pose::from_matrix(const Mat4& m) {
  return Pose{Rotation::from_matrix(m.topLeftCorner<3, 3>()), m.topRightCorner<3, 1>()};
}

Pose Pose::inverse() const {
  const Rotation r_inv = rotation.inverse();
  return Pose{r_inv, -(r_inv * translation)};
}

Pose Pose::operator*(const Pose& other) const {
  return Pose{rotation * other.rotation, rotation * other.translation + translation};
}

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation.matrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorCode::InvalidIntrinsics, "focal lengths must be positive");
  }
  if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height)) {
    throw Error(ErrorCode::InvalidIntrinsics, "principal point must lie inside the image");
  }
}

ImagePoint project(const CameraIntrinsics& intr, const Vec3& p_cam) {
  if (!(p_cam.z() > 0.0)) {
    throw Error(ErrorCode::NonPositiveDepth, "point has Z <= 0 in the camera frame");
  }
  return {intr.fx * p_cam.x() / p_cam.z() + intr.cx, intr.fy * p_cam.y() / p_cam.z() + intr.cy};
}

Vec3 unproject(const CameraIntrinsics& intr, const ImagePoint& f, double depth) {
  if (!std::isfinite(depth) || depth <= 0.0) {
    throw Error(ErrorCode::InvalidDepth, "depth must be positive and finite");
  }
  return {depth * (f.u - intr.cx) / intr.fx, depth * (f.v - intr.cy) / intr.fy, depth};
}

Eigen::Matrix<double, 2, 3> projection_jacobian(const CameraIntrinsics& intr, const Vec3& p_cam) {
  const double z = p_cam.z();
  const double z2 = z * z;
  Eigen::Matrix<double, 2, 3> j;
  j << intr.fx / z, 0.0, -intr.fx * p_cam.x() / z2,
       0.0, intr.fy / z, -intr.fy * p_cam.y() / z2;
  return j;
}

}  // namespace topoloc
