#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "topoloc/error.hpp"
#include "topoloc/mapgen.hpp"

namespace topoloc {

namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

Vec2 normalized(const CameraIntrinsics& intr, const ImagePoint& f) {
  return {(f.u - intr.cx) / intr.fx, (f.v - intr.cy) / intr.fy};
}

/// Sum of squared pixel residuals; +inf when any point falls behind the camera.
double reprojection_cost(const Matched3D2D& m, const CameraIntrinsics& intr, const Mat3& r,
                         const Vec3& t) {
  double cost = 0.0;
  for (const auto& pf : m.matches) {
    const Vec3 q = r * pf.point + t;
    if (q.z() <= 1e-9) return std::numeric_limits<double>::infinity();
    const double du = intr.fx * q.x() / q.z() + intr.cx - pf.feature.u;
    const double dv = intr.fy * q.y() / q.z() + intr.cy - pf.feature.v;
    cost += du * du + dv * dv;
  }
  return cost;
}

struct PointSpread {
  Vec3 centroid;
  Mat3 axes;         ///< columns sorted by decreasing spread
  Vec3 eigenvalues;  ///< decreasing
};

PointSpread spread(const Matched3D2D& m) {
  Vec3 c = Vec3::Zero();
  for (const auto& pf : m.matches) c += pf.point;
  c /= static_cast<double>(m.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& pf : m.matches) cov += (pf.point - c) * (pf.point - c).transpose();
  cov /= static_cast<double>(m.size());
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  PointSpread s;
  s.centroid = c;
  for (int i = 0; i < 3; ++i) {
    s.axes.col(i) = es.eigenvectors().col(2 - i);
    s.eigenvalues[i] = std::max(es.eigenvalues()[2 - i], 0.0);
  }
  return s;
}

Pose dlt_init(const Matched3D2D& m, const CameraIntrinsics& intr, const PointSpread& s) {
  const double scale = std::sqrt(s.eigenvalues.sum());
  const auto n = static_cast<Eigen::Index>(m.size());
  Eigen::MatrixXd a(2 * n, 12);
  a.setZero();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& pf = m.matches[static_cast<size_t>(i)];
    Eigen::Vector4d x;
    x << (pf.point - s.centroid) / scale, 1.0;
    const Vec2 f = normalized(intr, pf.feature);
    a.block<1, 4>(2 * i, 0) = x.transpose();
    a.block<1, 4>(2 * i, 8) = -f.x() * x.transpose();
    a.block<1, 4>(2 * i + 1, 4) = x.transpose();
    a.block<1, 4>(2 * i + 1, 8) = -f.y() * x.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv[10] < 1e-9 * sv[0]) {
    throw Error(ErrorCode::DegenerateConfiguration, "DLT system has a multi-dimensional null space");
  }
  Eigen::Matrix<double, 12, 1> p = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> pn;
  pn << p.segment<4>(0).transpose(), p.segment<4>(4).transpose(), p.segment<4>(8).transpose();
  // Undo the point normalization: X' = (X - c) / scale.
  Eigen::Matrix4d norm = Eigen::Matrix4d::Identity();
  norm.topLeftCorner<3, 3>() /= scale;
  norm.topRightCorner<3, 1>() = -s.centroid / scale;
  Eigen::Matrix<double, 3, 4> proj = pn * norm;

  // det(lambda R) = lambda^3, so a positive determinant fixes the sign.
  Mat3 mr = proj.leftCols<3>();
  if (mr.determinant() < 0.0) {
    proj = -proj;
    mr = -mr;
  }
  Eigen::JacobiSVD<Mat3> msvd(mr, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double lambda = msvd.singularValues().mean();
  const Mat3 r = msvd.matrixU() * msvd.matrixV().transpose();
  const Vec3 t = proj.col(3) / lambda;
  return Pose{Rotation::from_matrix(r), t};
}

Pose homography_init(const Matched3D2D& m, const CameraIntrinsics& intr, const PointSpread& s) {
  const Vec3 e1 = s.axes.col(0);
  const Vec3 e2 = s.axes.col(1);
  const double scale = std::sqrt(s.eigenvalues[0] + s.eigenvalues[1]);
  const auto n = static_cast<Eigen::Index>(m.size());
  Eigen::MatrixXd a(2 * n, 9);
  a.setZero();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& pf = m.matches[static_cast<size_t>(i)];
    const Vec3 d = pf.point - s.centroid;
    const Vec3 x(d.dot(e1) / scale, d.dot(e2) / scale, 1.0);
    const Vec2 f = normalized(intr, pf.feature);
    a.block<1, 3>(2 * i, 0) = x.transpose();
    a.block<1, 3>(2 * i, 6) = -f.x() * x.transpose();
    a.block<1, 3>(2 * i + 1, 3) = x.transpose();
    a.block<1, 3>(2 * i + 1, 6) = -f.y() * x.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv[7] < 1e-9 * sv[0]) {
    throw Error(ErrorCode::DegenerateConfiguration, "planar points do not determine a homography");
  }
  const Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
  Mat3 hm;
  hm << h.segment<3>(0).transpose(), h.segment<3>(3).transpose(), h.segment<3>(6).transpose();
  // Columns are lambda * [R e1 * scale, R e2 * scale, R c + t].
  Vec3 h1 = hm.col(0) / scale;
  Vec3 h2 = hm.col(1) / scale;
  Vec3 h3 = hm.col(2);
  double lambda = 0.5 * (h1.norm() + h2.norm());
  if (h3.z() < 0.0) lambda = -lambda;
  h1 /= lambda;
  h2 /= lambda;
  h3 /= lambda;
  Mat3 re;
  re << h1, h2, h1.cross(h2);
  Eigen::JacobiSVD<Mat3> rsvd(re, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r_e = rsvd.matrixU() * rsvd.matrixV().transpose();
  if (r_e.determinant() < 0.0) {
    Mat3 u = rsvd.matrixU();
    u.col(2) *= -1.0;
    r_e = u * rsvd.matrixV().transpose();
  }
  Mat3 e;
  e << e1, e2, e1.cross(e2);
  const Mat3 r = r_e * e.transpose();
  return Pose{Rotation::from_matrix(r), h3 - r * s.centroid};
}

PnpResult gauss_newton(const Matched3D2D& m, const CameraIntrinsics& intr, const Pose& initial,
                       const PnpOptions& options) {
  Mat3 r = initial.rotation.matrix();
  Vec3 t = initial.translation;
  double cost = reprojection_cost(m, intr, r, t);
  if (!std::isfinite(cost)) {
    throw Error(ErrorCode::NoConvergence, "initial PnP estimate puts points behind the camera");
  }
  const double n = static_cast<double>(m.size());
  PnpResult res;
  res.rms_history.push_back(std::sqrt(cost / n));
  bool converged = false;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    Mat6 jtj = Mat6::Zero();
    Vec6 jtr = Vec6::Zero();
    for (const auto& pf : m.matches) {
      const Vec3 rx = r * pf.point;
      const Vec3 q = rx + t;
      const Eigen::Matrix<double, 2, 3> jp = projection_jacobian(intr, q);
      Eigen::Matrix<double, 3, 6> dq;
      dq << -skew(rx), Mat3::Identity();
      const Eigen::Matrix<double, 2, 6> j = jp * dq;
      const Vec2 res_i(intr.fx * q.x() / q.z() + intr.cx - pf.feature.u,
                       intr.fy * q.y() / q.z() + intr.cy - pf.feature.v);
      jtj += j.transpose() * j;
      jtr += j.transpose() * res_i;
    }
    Eigen::LDLT<Mat6> ldlt(jtj);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw Error(ErrorCode::DegenerateConfiguration, "PnP normal matrix is singular");
    }
    Vec6 step = -ldlt.solve(jtr);
    if (!step.allFinite()) {
      throw Error(ErrorCode::DegenerateConfiguration, "PnP normal matrix is singular");
    }
    bool accepted = false;
    for (int halving = 0; halving < 30; ++halving) {
      const Mat3 r_new = so3_exp(step.head<3>()).matrix() * r;
      const Vec3 t_new = t + step.tail<3>();
      const double c_new = reprojection_cost(m, intr, r_new, t_new);
      if (c_new <= cost) {
        r = Rotation::from_matrix(r_new).matrix();
        t = t_new;
        cost = c_new;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (accepted) res.rms_history.push_back(std::sqrt(cost / n));
    if (!accepted || step.norm() < options.step_tolerance) {
      converged = true;
      ++it;
      break;
    }
  }
  if (!converged) {
    const auto& h = res.rms_history;
    const double prev = h.size() >= 2 ? h[h.size() - 2] : h.back();
    if (!(prev - h.back() <= 1e-9 * std::max(1.0, prev))) {
      throw Error(ErrorCode::NoConvergence, "PnP did not settle in " + std::to_string(options.max_iterations) + " iterations");
    }
  }
  res.transform = Pose{Rotation::from_matrix(r), t};
  res.rms_px = std::sqrt(cost / n);
  res.iterations = it;
  return res;
}

}  // namespace

PnpResult solve_pnp(const Matched3D2D& matches, const CameraIntrinsics& intr, const PnpOptions& options) {
  if (matches.size() < 4) {
    throw Error(ErrorCode::DegenerateConfiguration,
                "PnP needs at least 4 matches, got " + std::to_string(matches.size()));
  }
  const PointSpread s = spread(matches);
  if (s.eigenvalues[1] <= 1e-12 * std::max(s.eigenvalues[0], 1e-300)) {
    throw Error(ErrorCode::DegenerateConfiguration, "PnP points are collinear or coincident");
  }
  const bool planar = s.eigenvalues[2] <= 1e-10 * s.eigenvalues[0];
  Pose init;
  if (planar) {
    init = homography_init(matches, intr, s);
  } else {
    if (matches.size() < 6) {
      throw Error(ErrorCode::DegenerateConfiguration,
                  "non-planar PnP without an initial guess needs at least 6 matches");
    }
    init = dlt_init(matches, intr, s);
  }
  return gauss_newton(matches, intr, init, options);
}

PnpResult solve_pnp(const Matched3D2D& matches, const CameraIntrinsics& intr, const Pose& initial,
                    const PnpOptions& options) {
  if (matches.size() < 3) {
    throw Error(ErrorCode::DegenerateConfiguration, "PnP needs at least 3 matches");
  }
  return gauss_newton(matches, intr, initial, options);
}

}  // namespace topoloc
