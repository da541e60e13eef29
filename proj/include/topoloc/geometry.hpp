#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace topoloc {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Antisymmetric matrix with skew(v) * w == v.cross(w).
Mat3 skew(const Vec3& v);

/// Rotation stored as a unit quaternion. Every constructor and operation
/// returns a normalized value.
class Rotation {
 public:
  Rotation() : q_(Eigen::Quaterniond::Identity()) {}

  /// Normalizes unless the input is already unit within 1e-15, so that
  /// values read back from disk keep their exact bits.
  static Rotation from_quaternion(const Eigen::Quaterniond& q);
  static Rotation from_matrix(const Mat3& m);
  static Rotation identity() { return Rotation(); }

  const Eigen::Quaterniond& quaternion() const { return q_; }
  Mat3 matrix() const { return q_.toRotationMatrix(); }

  Rotation inverse() const;
  Rotation operator*(const Rotation& other) const;
  Vec3 operator*(const Vec3& v) const { return q_ * v; }

 private:
  explicit Rotation(const Eigen::Quaterniond& q) : q_(q) {}
  Eigen::Quaterniond q_;
};

/// Rodrigues map; series expansion below 1e-8 rad.
Rotation so3_exp(const Vec3& theta);
/// Inverse of so3_exp on the closed ball of radius pi. Computed from the
/// quaternion with w >= 0, which stays well conditioned at angle pi.
Vec3 so3_log(const Rotation& r);

/// Right Jacobian of SO(3): exp(t + d) ~= exp(t) exp(Jr(t) d).
Mat3 so3_right_jacobian(const Vec3& theta);
Mat3 so3_right_jacobian_inverse(const Vec3& theta);

/// Rigid transform mapping points from a child frame into its parent frame:
/// p_parent = rotation * p_child + translation.
struct Pose {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return Pose{}; }
  static Pose from_matrix(const Mat4& m);

  Pose inverse() const;
  Pose operator*(const Pose& other) const;
  Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }
  Mat4 matrix() const;
};

struct ImagePoint {
  double u = 0.0;
  double v = 0.0;

  Vec2 vec() const { return {u, v}; }
};

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Throws InvalidIntrinsics unless focal lengths are positive and the
  /// principal point lies strictly inside the image.
  void validate() const;
  bool contains(const ImagePoint& f) const {
    return f.u >= 0.0 && f.v >= 0.0 && f.u <= width - 1.0 && f.v <= height - 1.0;
  }
};

/// Pinhole projection. No clipping to image bounds. Throws NonPositiveDepth
/// when p_cam.z() <= 0.
ImagePoint project(const CameraIntrinsics& intr, const Vec3& p_cam);

/// Inverse of project for a known depth (the z coordinate). Throws
/// InvalidDepth for depth <= 0 or non-finite.
Vec3 unproject(const CameraIntrinsics& intr, const ImagePoint& f, double depth);

/// d(project)/d(p_cam) at p_cam.
Eigen::Matrix<double, 2, 3> projection_jacobian(const CameraIntrinsics& intr, const Vec3& p_cam);

}  // namespace topoloc
