#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <vector>

#include "topoloc/geometry.hpp"
#include "topoloc/image.hpp"

namespace topoloc {

/// One map node: depth and intensity rendered at a camera pose, plus the pose
/// of that camera in the global frame.
struct TopoNode {
  int node_id = -1;
  DepthImage depth;
  IntensityImage image;
  Pose pose;  ///< camera-in-global
  double timestamp = 0.0;
};

/// Exact 3D nearest-neighbour index over node positions. Ties in distance go
/// to the lower id.
class KdTree {
 public:
  void build(const std::vector<Vec3>& points);
  void insert(const Vec3& point, int id);
  int nearest(const Vec3& query) const;
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Vec3 point;
    int id = -1;
    int axis = 0;
    int left = -1;
    int right = -1;
  };

  int build_range(std::vector<int>& order, const std::vector<Vec3>& points, int begin, int end,
                  int depth);
  void search(int index, const Vec3& query, double& best_d2, int& best_id) const;

  std::vector<Node> nodes_;
  int root_ = -1;
};

class TopologicalMap {
 public:
  TopologicalMap() = default;
  explicit TopologicalMap(const CameraIntrinsics& intrinsics) : intrinsics_(intrinsics) {}

  const CameraIntrinsics& intrinsics() const { return intrinsics_; }
  void set_intrinsics(const CameraIntrinsics& intr) { intrinsics_ = intr; }

  /// Appends the node, assigning the next dense id. A repeated timestamp is
  /// logged as a warning and the node is still inserted. Throws
  /// DimensionMismatch for empty images or depth/image size disagreement.
  int insert_node(TopoNode node);

  /// Throws EmptyMap on an empty map.
  const TopoNode& nearest_node(const Vec3& position) const;

  const TopoNode& node(int id) const { return nodes_.at(static_cast<size_t>(id)); }
  const std::vector<TopoNode>& nodes() const { return nodes_; }
  size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }

  /// Rebalances the spatial index (inserts keep it exact but unbalanced).
  void rebuild_index();

 private:
  CameraIntrinsics intrinsics_;
  std::vector<TopoNode> nodes_;
  KdTree index_;
};

/// Nearest-pixel depth lookup then unprojection, in the camera frame of the
/// depth image. Throws OutOfBounds or NoDepth.
Vec3 depth_to_point(const DepthImage& depth, const CameraIntrinsics& intr, const ImagePoint& f);
Vec3 depth_to_point(const TopoNode& node, const CameraIntrinsics& intr, const ImagePoint& f);

/// depth_to_point mapped into the global frame with the node pose.
Vec3 map_point_global(const TopoNode& node, const CameraIntrinsics& intr, const ImagePoint& f);

/// Map bundle directory: manifest.json, depth_<id>.tdm, image_<id>.pgm.
void save_map(const TopologicalMap& map, const std::filesystem::path& dir);
TopologicalMap load_map(const std::filesystem::path& dir);

}  // namespace topoloc
