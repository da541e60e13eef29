#include "topoloc/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "topoloc/error.hpp"

namespace topoloc::io {

namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

std::ofstream open_out(const fs::path& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  }
  return out;
}

std::ifstream open_in(const fs::path& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  return in;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

bool blank_or_comment(const std::string& line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

/// Splits on commas; throws ParseError when a field is not a number.
std::vector<double> parse_csv_numbers(const std::string& line, const fs::path& path, int line_no) {
  std::vector<double> values;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    try {
      size_t used = 0;
      values.push_back(std::stod(field, &used));
    } catch (const std::exception&) {
      throw Error(ErrorCode::ParseError,
                  path.string() + ":" + std::to_string(line_no) + ": not a number: '" + field + "'");
    }
  }
  return values;
}

/// Reads numeric CSV rows with the expected column count. A first line that
/// does not start with a digit/sign is treated as a header.
std::vector<std::vector<double>> read_numeric_csv(const fs::path& path, size_t columns) {
  auto in = open_in(path, false);
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank_or_comment(line)) continue;
    if (line_no == 1) {
      const char c = line[line.find_first_not_of(" \t")];
      if (!(std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.')) {
        continue;
      }
    }
    auto values = parse_csv_numbers(line, path, line_no);
    if (values.size() != columns) {
      throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line_no) +
                                             ": expected " + std::to_string(columns) +
                                             " columns, got " + std::to_string(values.size()));
    }
    rows.push_back(std::move(values));
  }
  return rows;
}

std::string fmt(const char* format, double v) {
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), format, v);
  return buf.data();
}

}  // namespace

void write_tdm(const fs::path& path, const DepthImage& depth) {
  auto out = open_out(path, true);
  out.write("TDM1", 4);
  write_u32(out, static_cast<std::uint32_t>(depth.width()));
  write_u32(out, static_cast<std::uint32_t>(depth.height()));
  out.write(reinterpret_cast<const char*>(depth.data().data()),
            static_cast<std::streamsize>(depth.data().size() * sizeof(float)));
  if (!out) {
    throw Error(ErrorCode::IoError, "failed writing " + path.string());
  }
}

DepthImage read_tdm(const fs::path& path) {
  auto in = open_in(path, true);
  std::array<char, 4> magic{};
  std::uint32_t w = 0;
  std::uint32_t h = 0;
  in.read(magic.data(), 4);
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  if (!in || std::memcmp(magic.data(), "TDM1", 4) != 0) {
    throw Error(ErrorCode::FormatVersionMismatch, path.string() + " is not a TDM1 depth file");
  }
  if (w > 100000 || h > 100000) {
    throw Error(ErrorCode::FormatVersionMismatch, path.string() + " has implausible dimensions");
  }
  DepthImage depth(static_cast<int>(w), static_cast<int>(h));
  in.read(reinterpret_cast<char*>(depth.data().data()),
          static_cast<std::streamsize>(depth.data().size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(depth.data().size() * sizeof(float))) {
    throw Error(ErrorCode::ChecksumMismatch, path.string() + " is truncated");
  }
  return depth;
}

void write_pgm(const fs::path& path, const IntensityImage& image) {
  auto out = open_out(path, true);
  out << "P5\n" << image.width() << " " << image.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data().data()),
            static_cast<std::streamsize>(image.data().size()));
  if (!out) {
    throw Error(ErrorCode::IoError, "failed writing " + path.string());
  }
}

IntensityImage read_pgm(const fs::path& path) {
  auto in = open_in(path, true);
  std::string magic;
  int w = 0;
  int h = 0;
  int maxval = 0;
  in >> magic;
  // Skip comment lines between header tokens.
  auto next_int = [&](int& v) {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string skip;
      std::getline(in, skip);
      in >> std::ws;
    }
    in >> v;
  };
  next_int(w);
  next_int(h);
  next_int(maxval);
  if (!in || magic != "P5" || maxval != 255 || w <= 0 || h <= 0) {
    throw Error(ErrorCode::FormatVersionMismatch, path.string() + " is not an 8-bit P5 PGM");
  }
  in.get();  // single whitespace after maxval
  IntensityImage image(w, h);
  in.read(reinterpret_cast<char*>(image.data().data()),
          static_cast<std::streamsize>(image.data().size()));
  if (in.gcount() != static_cast<std::streamsize>(image.data().size())) {
    throw Error(ErrorCode::ChecksumMismatch, path.string() + " is truncated");
  }
  return image;
}

std::string format_tum_line(const StampedPose& p) {
  const auto& q = p.pose.rotation.quaternion();
  const auto& t = p.pose.translation;
  std::string line = fmt("%.6f", p.timestamp);
  for (double v : {t.x(), t.y(), t.z()}) line += " " + fmt("%.9f", v);
  for (double v : {q.x(), q.y(), q.z(), q.w()}) line += " " + fmt("%.12f", v);
  return line;
}

void write_tum(const fs::path& path, const std::vector<StampedPose>& poses) {
  auto out = open_out(path, false);
  for (const auto& p : poses) {
    out << format_tum_line(p) << "\n";
  }
}

std::vector<StampedPose> read_tum(const fs::path& path) {
  auto in = open_in(path, false);
  std::vector<StampedPose> poses;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank_or_comment(line)) continue;
    std::istringstream ss(line);
    double v[8];
    for (double& x : v) ss >> x;
    if (!ss) {
      throw Error(ErrorCode::ParseError,
                  path.string() + ":" + std::to_string(line_no) + ": expected 8 TUM fields");
    }
    StampedPose p;
    p.timestamp = v[0];
    p.pose.translation = Vec3(v[1], v[2], v[3]);
    p.pose.rotation = Rotation::from_quaternion(Eigen::Quaterniond(v[7], v[4], v[5], v[6]));
    poses.push_back(p);
  }
  return poses;
}

void write_imu_csv(const fs::path& path, const std::vector<ImuSample>& samples) {
  auto out = open_out(path, false);
  out << "timestamp,ax,ay,az,wx,wy,wz\n";
  for (const auto& s : samples) {
    out << fmt("%.6f", s.timestamp);
    for (double v : {s.acc.x(), s.acc.y(), s.acc.z(), s.gyro.x(), s.gyro.y(), s.gyro.z()}) {
      out << "," << fmt("%.17g", v);
    }
    out << "\n";
  }
}

std::vector<ImuSample> read_imu_csv(const fs::path& path) {
  std::vector<ImuSample> samples;
  for (const auto& r : read_numeric_csv(path, 7)) {
    samples.push_back({r[0], Vec3(r[1], r[2], r[3]), Vec3(r[4], r[5], r[6])});
  }
  return samples;
}

void write_speed_csv(const fs::path& path, const std::vector<SpeedSample>& samples) {
  auto out = open_out(path, false);
  out << "timestamp,vx\n";
  for (const auto& s : samples) {
    out << fmt("%.6f", s.timestamp) << "," << fmt("%.17g", s.vx) << "\n";
  }
}

std::vector<SpeedSample> read_speed_csv(const fs::path& path) {
  std::vector<SpeedSample> samples;
  for (const auto& r : read_numeric_csv(path, 2)) {
    samples.push_back({r[0], r[1]});
  }
  return samples;
}

void write_correspondence_csv(const fs::path& path, const RecordedMatches& matches) {
  auto out = open_out(path, false);
  if (matches.node_id >= 0) {
    out << "# node=" << matches.node_id << "\n";
  }
  for (const auto& c : matches.pairs) {
    out << fmt("%.17g", c.current.u) << "," << fmt("%.17g", c.current.v) << ","
        << fmt("%.17g", c.node.u) << "," << fmt("%.17g", c.node.v) << "\n";
  }
}

RecordedMatches read_correspondence_csv(const fs::path& path) {
  RecordedMatches rec;
  {
    auto in = open_in(path, false);
    std::string first;
    if (std::getline(in, first) && first.rfind("# node=", 0) == 0) {
      rec.node_id = std::stoi(first.substr(7));
    }
  }
  for (const auto& r : read_numeric_csv(path, 4)) {
    rec.pairs.push_back({{r[0], r[1]}, {r[2], r[3]}});
  }
  return rec;
}

void write_frames_csv(const fs::path& path, const std::vector<FrameRecord>& frames) {
  auto out = open_out(path, false);
  out << "index,timestamp,tx,ty,tz,qx,qy,qz,qw\n";
  for (const auto& f : frames) {
    out << f.index << "," << fmt("%.6f", f.timestamp);
    if (f.true_pose) {
      const auto& t = f.true_pose->translation;
      const auto& q = f.true_pose->rotation.quaternion();
      for (double v : {t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w()}) out << "," << fmt("%.17g", v);
    }
    out << "\n";
  }
}

std::vector<FrameRecord> read_frames_csv(const fs::path& path) {
  auto in = open_in(path, false);
  std::vector<FrameRecord> frames;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank_or_comment(line)) continue;
    if (line_no == 1 && line.rfind("index", 0) == 0) continue;
    const auto v = parse_csv_numbers(line, path, line_no);
    if (v.size() != 2 && v.size() != 9) {
      throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line_no) +
                                             ": expected 2 or 9 columns, got " + std::to_string(v.size()));
    }
    FrameRecord f;
    f.index = static_cast<int>(v[0]);
    f.timestamp = v[1];
    if (v.size() == 9) {
      f.true_pose = Pose{Rotation::from_quaternion(Eigen::Quaterniond(v[8], v[5], v[6], v[7])),
                         Vec3(v[2], v[3], v[4])};
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

namespace {

enum class PlyType { Float32, Float64, UInt8, Int32, UInt32, Int16, UInt16, Int8 };

PlyType parse_ply_type(const std::string& t, const fs::path& path) {
  if (t == "float" || t == "float32") return PlyType::Float32;
  if (t == "double" || t == "float64") return PlyType::Float64;
  if (t == "uchar" || t == "uint8") return PlyType::UInt8;
  if (t == "char" || t == "int8") return PlyType::Int8;
  if (t == "short" || t == "int16") return PlyType::Int16;
  if (t == "ushort" || t == "uint16") return PlyType::UInt16;
  if (t == "int" || t == "int32") return PlyType::Int32;
  if (t == "uint" || t == "uint32") return PlyType::UInt32;
  throw Error(ErrorCode::ParseError, path.string() + ": unsupported PLY property type " + t);
}

size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::Float64: return 8;
    case PlyType::Float32:
    case PlyType::Int32:
    case PlyType::UInt32: return 4;
    case PlyType::Int16:
    case PlyType::UInt16: return 2;
    case PlyType::UInt8:
    case PlyType::Int8: return 1;
  }
  return 0;
}

template <typename T>
double load_as(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return static_cast<double>(v);
}

double decode(PlyType t, const char* p) {
  switch (t) {
    case PlyType::Float32: return load_as<float>(p);
    case PlyType::Float64: return load_as<double>(p);
    case PlyType::UInt8: return load_as<std::uint8_t>(p);
    case PlyType::Int8: return load_as<std::int8_t>(p);
    case PlyType::Int16: return load_as<std::int16_t>(p);
    case PlyType::UInt16: return load_as<std::uint16_t>(p);
    case PlyType::Int32: return load_as<std::int32_t>(p);
    case PlyType::UInt32: return load_as<std::uint32_t>(p);
  }
  return 0.0;
}

}  // namespace

void write_ply(const fs::path& path, const PointCloud& cloud) {
  auto out = open_out(path, true);
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << cloud.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "property uchar intensity\nend_header\n";
  for (const auto& p : cloud) {
    for (int i = 0; i < 3; ++i) {
      const double v = p.position[i];
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
    const auto inten = static_cast<std::uint8_t>(std::clamp(p.intensity, 0.0, 255.0));
    out.write(reinterpret_cast<const char*>(&inten), 1);
  }
  if (!out) {
    throw Error(ErrorCode::IoError, "failed writing " + path.string());
  }
}

PointCloud read_ply(const fs::path& path) {
  auto in = open_in(path, true);
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) {
    throw Error(ErrorCode::ParseError, path.string() + " is not a PLY file");
  }
  bool binary = false;
  size_t vertex_count = 0;
  bool in_vertex = false;
  struct Prop {
    std::string name;
    PlyType type;
  };
  std::vector<Prop> props;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "format") {
      std::string f;
      ss >> f;
      if (f == "binary_little_endian") {
        binary = true;
      } else if (f != "ascii") {
        throw Error(ErrorCode::ParseError, path.string() + ": unsupported PLY format " + f);
      }
    } else if (key == "element") {
      std::string name;
      size_t count = 0;
      ss >> name >> count;
      in_vertex = name == "vertex";
      if (in_vertex) {
        vertex_count = count;
      } else if (count > 0 && vertex_count == 0) {
        throw Error(ErrorCode::ParseError, path.string() + ": vertex element must come first");
      }
    } else if (key == "property" && in_vertex) {
      std::string type;
      std::string name;
      ss >> type >> name;
      if (type == "list") {
        throw Error(ErrorCode::ParseError, path.string() + ": list properties on vertices unsupported");
      }
      props.push_back({name, parse_ply_type(type, path)});
    } else if (key == "end_header") {
      break;
    }
  }
  int ix = -1, iy = -1, iz = -1, ii = -1;
  for (size_t i = 0; i < props.size(); ++i) {
    if (props[i].name == "x") ix = static_cast<int>(i);
    if (props[i].name == "y") iy = static_cast<int>(i);
    if (props[i].name == "z") iz = static_cast<int>(i);
    if (props[i].name == "intensity") ii = static_cast<int>(i);
  }
  if (ix < 0 || iy < 0 || iz < 0) {
    throw Error(ErrorCode::ParseError, path.string() + ": PLY lacks x/y/z properties");
  }
  PointCloud cloud;
  cloud.reserve(vertex_count);
  std::vector<double> values(props.size());
  std::vector<char> buf;
  for (size_t v = 0; v < vertex_count; ++v) {
    if (binary) {
      for (size_t i = 0; i < props.size(); ++i) {
        const size_t n = ply_size(props[i].type);
        buf.resize(n);
        in.read(buf.data(), static_cast<std::streamsize>(n));
        values[i] = decode(props[i].type, buf.data());
      }
    } else {
      for (auto& value : values) in >> value;
    }
    if (!in) {
      throw Error(ErrorCode::ParseError, path.string() + ": truncated vertex data");
    }
    CloudPoint p;
    p.position = Vec3(values[ix], values[iy], values[iz]);
    p.intensity = ii >= 0 ? values[ii] : 0.0;
    cloud.push_back(p);
  }
  return cloud;
}

CameraIntrinsics read_intrinsics_json(const fs::path& path) {
  auto in = open_in(path, false);
  nlohmann::json j;
  try {
    in >> j;
    CameraIntrinsics intr;
    intr.fx = j.at("fx").get<double>();
    intr.fy = j.at("fy").get<double>();
    intr.cx = j.at("cx").get<double>();
    intr.cy = j.at("cy").get<double>();
    intr.width = j.at("width").get<int>();
    intr.height = j.at("height").get<int>();
    intr.validate();
    return intr;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

void write_intrinsics_json(const fs::path& path, const CameraIntrinsics& intr) {
  nlohmann::json j = {{"fx", intr.fx},       {"fy", intr.fy},          {"cx", intr.cx},
                      {"cy", intr.cy},       {"width", intr.width},    {"height", intr.height}};
  auto out = open_out(path, false);
  out << j.dump(2) << "\n";
}

}  // namespace topoloc::io
