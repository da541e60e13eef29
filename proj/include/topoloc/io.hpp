#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "topoloc/geometry.hpp"
#include "topoloc/image.hpp"

namespace topoloc {

struct StampedPose {
  double timestamp = 0.0;
  Pose pose;
};

struct ImuSample {
  double timestamp = 0.0;
  Vec3 acc = Vec3::Zero();   ///< a_m, m/s^2
  Vec3 gyro = Vec3::Zero();  ///< w_m, rad/s
};

struct SpeedSample {
  double timestamp = 0.0;
  double vx = 0.0;  ///< m/s
};

/// A LiDAR-style point with intensity 0..255.
struct CloudPoint {
  Vec3 position = Vec3::Zero();
  double intensity = 0.0;
};
using PointCloud = std::vector<CloudPoint>;

/// One pixel correspondence between the current image and a node image.
struct Correspondence {
  ImagePoint current;
  ImagePoint node;
};

namespace io {

/// `.tdm`: "TDM1", u32 width, u32 height (little endian), then width*height
/// little-endian float32 values, row-major.
void write_tdm(const std::filesystem::path& path, const DepthImage& depth);
DepthImage read_tdm(const std::filesystem::path& path);

/// Binary PGM (P5), maxval 255.
void write_pgm(const std::filesystem::path& path, const IntensityImage& image);
IntensityImage read_pgm(const std::filesystem::path& path);

/// TUM trajectory text: `timestamp tx ty tz qx qy qz qw` per line; '#' lines
/// are comments.
void write_tum(const std::filesystem::path& path, const std::vector<StampedPose>& poses);
std::vector<StampedPose> read_tum(const std::filesystem::path& path);
std::string format_tum_line(const StampedPose& pose);

/// `timestamp,ax,ay,az,wx,wy,wz`; a header line is skipped when present.
void write_imu_csv(const std::filesystem::path& path, const std::vector<ImuSample>& samples);
std::vector<ImuSample> read_imu_csv(const std::filesystem::path& path);

/// `timestamp,vx`.
void write_speed_csv(const std::filesystem::path& path, const std::vector<SpeedSample>& samples);
std::vector<SpeedSample> read_speed_csv(const std::filesystem::path& path);

/// Recorded correspondences: `u_cur,v_cur,u_node,v_node` per line. A leading
/// `# node=<id>` comment records which map node the pairs refer to.
struct RecordedMatches {
  int node_id = -1;
  std::vector<Correspondence> pairs;
};
void write_correspondence_csv(const std::filesystem::path& path, const RecordedMatches& matches);
RecordedMatches read_correspondence_csv(const std::filesystem::path& path);

/// PLY with x, y, z (float/double) and intensity (uchar/float). Reads ascii
/// and binary_little_endian; writes binary_little_endian.
void write_ply(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_ply(const std::filesystem::path& path);

/// Frame list: `index,timestamp` optionally followed by the true camera pose
/// `tx,ty,tz,qx,qy,qz,qw`.
struct FrameRecord {
  int index = 0;
  double timestamp = 0.0;
  std::optional<Pose> true_pose;
};
void write_frames_csv(const std::filesystem::path& path, const std::vector<FrameRecord>& frames);
std::vector<FrameRecord> read_frames_csv(const std::filesystem::path& path);

/// Reads an intrinsics JSON object {fx, fy, cx, cy, width, height}.
CameraIntrinsics read_intrinsics_json(const std::filesystem::path& path);
void write_intrinsics_json(const std::filesystem::path& path, const CameraIntrinsics& intr);

}  // namespace io
}  // namespace topoloc
