#include <zlib.h>

#include <fstream>
#include <iterator>
#include <string>

#include <json.hpp>

#include "topoloc/error.hpp"
#include "topoloc/io.hpp"
#include "topoloc/topomap.hpp"

namespace topoloc {

namespace fs = std::filesystem;

namespace {

constexpr int kMapFormatVersion = 1;

std::uint32_t file_crc32(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

std::string depth_name(int id) { return "depth_" + std::to_string(id) + ".tdm"; }
std::string image_name(int id) { return "image_" + std::to_string(id) + ".pgm"; }

}  // namespace

void save_map(const TopologicalMap& map, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorCode::IoError, "cannot create map directory " + dir.string() + ": " + ec.message());
  }
  const auto& intr = map.intrinsics();
  nlohmann::json manifest;
  manifest["version"] = kMapFormatVersion;
  manifest["intrinsics"] = {{"fx", intr.fx},    {"fy", intr.fy},       {"cx", intr.cx},
                            {"cy", intr.cy},    {"width", intr.width}, {"height", intr.height}};
  manifest["nodes"] = nlohmann::json::array();
  for (const auto& node : map.nodes()) {
    io::write_tdm(dir / depth_name(node.node_id), node.depth);
    io::write_pgm(dir / image_name(node.node_id), node.image);
    const auto& q = node.pose.rotation.quaternion();
    const auto& t = node.pose.translation;
    manifest["nodes"].push_back({
        {"id", node.node_id},
        {"timestamp", node.timestamp},
        {"t", {t.x(), t.y(), t.z()}},
        {"q", {q.x(), q.y(), q.z(), q.w()}},
        {"depth_crc32", file_crc32(dir / depth_name(node.node_id))},
        {"image_crc32", file_crc32(dir / image_name(node.node_id))},
    });
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot write " + (dir / "manifest.json").string());
  }
  out << manifest.dump(1) << "\n";
}

TopologicalMap load_map(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::IoError, "map directory not found: " + dir.string());
  }
  std::ifstream in(manifest_path);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open " + manifest_path.string());
  }
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatVersionMismatch,
                manifest_path.string() + " is not a valid manifest: " + e.what());
  }
  if (!manifest.contains("version") || manifest["version"] != kMapFormatVersion) {
    throw Error(ErrorCode::FormatVersionMismatch,
                manifest_path.string() + ": expected version " + std::to_string(kMapFormatVersion));
  }
  try {
    const auto& ji = manifest.at("intrinsics");
    CameraIntrinsics intr{ji.at("fx").get<double>(), ji.at("fy").get<double>(),
                          ji.at("cx").get<double>(), ji.at("cy").get<double>(),
                          ji.at("width").get<int>(), ji.at("height").get<int>()};
    TopologicalMap map(intr);
    int expected_id = 0;
    for (const auto& jn : manifest.at("nodes")) {
      const int id = jn.at("id").get<int>();
      if (id != expected_id++) {
        throw Error(ErrorCode::FormatVersionMismatch, "node ids in manifest are not dense");
      }
      const fs::path depth_path = dir / depth_name(id);
      const fs::path image_path = dir / image_name(id);
      if (file_crc32(depth_path) != jn.at("depth_crc32").get<std::uint32_t>() ||
          file_crc32(image_path) != jn.at("image_crc32").get<std::uint32_t>()) {
        throw Error(ErrorCode::ChecksumMismatch, "node " + std::to_string(id) + " files do not match manifest");
      }
      TopoNode node;
      node.timestamp = jn.at("timestamp").get<double>();
      const auto t = jn.at("t").get<std::vector<double>>();
      const auto q = jn.at("q").get<std::vector<double>>();
      if (t.size() != 3 || q.size() != 4) {
        throw Error(ErrorCode::FormatVersionMismatch, "node " + std::to_string(id) + " pose malformed");
      }
      node.pose.translation = Vec3(t[0], t[1], t[2]);
      node.pose.rotation = Rotation::from_quaternion(Eigen::Quaterniond(q[3], q[0], q[1], q[2]));
      node.depth = io::read_tdm(depth_path);
      node.image = io::read_pgm(image_path);
      map.insert_node(std::move(node));
    }
    map.rebuild_index();
    return map;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatVersionMismatch, manifest_path.string() + ": " + e.what());
  }
}

}  // namespace topoloc
