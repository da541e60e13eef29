#include "topoloc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "topoloc/error.hpp"

namespace topoloc {

Trajectory::Trajectory(std::vector<StampedPose> poses) : poses_(std::move(poses)) {
  for (size_t i = 1; i < poses_.size(); ++i) {
    if (!(poses_[i].timestamp > poses_[i - 1].timestamp)) {
      throw Error(ErrorCode::DuplicateTimestamp,
                  "trajectory timestamps not strictly increasing at index " + std::to_string(i));
    }
  }
}

ApeReport ape(const Trajectory& estimate, const Trajectory& truth, double max_dt) {
  const auto& tr = truth.poses();
  std::vector<char> used(tr.size(), 0);
  ApeReport rep;
  for (const auto& e : estimate.poses()) {
    auto it = std::lower_bound(tr.begin(), tr.end(), e.timestamp,
                               [](const StampedPose& p, double t) { return p.timestamp < t; });
    // Nearest unused candidate on either side of the insertion point.
    long best = -1;
    double best_dt = max_dt;
    const long pivot = static_cast<long>(it - tr.begin());
    for (long i = pivot; i < static_cast<long>(tr.size()); ++i) {
      const double dt = tr[static_cast<size_t>(i)].timestamp - e.timestamp;
      if (dt > best_dt) break;
      if (!used[static_cast<size_t>(i)]) {
        best = i;
        best_dt = dt;
        break;
      }
    }
    for (long i = pivot - 1; i >= 0; --i) {
      const double dt = e.timestamp - tr[static_cast<size_t>(i)].timestamp;
      if (dt > best_dt) break;
      if (!used[static_cast<size_t>(i)] && (best < 0 || dt < best_dt)) {
        best = i;
        best_dt = dt;
        break;
      }
    }
    if (best < 0) continue;
    used[static_cast<size_t>(best)] = 1;
    const Pose& t = tr[static_cast<size_t>(best)].pose;
    const Vec3 d = e.pose.translation - t.translation;
    const Mat3 rt = t.rotation.matrix();
    const double c = 0.5 * ((rt.transpose() * e.pose.rotation.matrix()).trace() - 1.0);
    ApeSample s;
    s.t = e.timestamp;
    s.et = d.norm();
    s.er = std::acos(std::clamp(c, -1.0, 1.0));
    s.lon = std::abs(d.dot(rt.col(0)));
    s.lat = std::abs(d.dot(rt.col(1)));
    rep.series.push_back(s);
  }
  if (rep.series.empty()) {
    throw Error(ErrorCode::NoTimestampOverlap,
                "no estimate pose has a ground-truth pose within " + std::to_string(max_dt) + " s");
  }
  for (const auto& s : rep.series) {
    rep.ape_t_m += s.et;
    rep.ape_r_rad += s.er;
    rep.lon_m += s.lon;
    rep.lat_m += s.lat;
  }
  rep.n_pairs = rep.series.size();
  const double n = static_cast<double>(rep.n_pairs);
  rep.ape_t_m /= n;
  rep.ape_r_rad /= n;
  rep.lon_m /= n;
  rep.lat_m /= n;
  return rep;
}

std::string ape_report_json(const ApeReport& report) {
  nlohmann::ordered_json j;
  j["ape_t_m"] = report.ape_t_m;
  j["ape_r_rad"] = report.ape_r_rad;
  j["lon_m"] = report.lon_m;
  j["lat_m"] = report.lat_m;
  j["lon_lat_frame"] = "true body frame";
  j["n_pairs"] = report.n_pairs;
  auto& series = j["series"] = nlohmann::ordered_json::array();
  for (const auto& s : report.series) {
    series.push_back({{"t", s.t}, {"et", s.et}, {"er", s.er}});
  }
  return j.dump(2);
}

void write_error_csv(const std::filesystem::path& path, const ApeReport& report) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "t,et,er,lon,lat\n";
  char buf[160];
  for (const auto& s : report.series) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.9f,%.9f,%.9f,%.9f\n", s.t, s.et, s.er, s.lon, s.lat);
    out << buf;
  }
}

}  // namespace topoloc
