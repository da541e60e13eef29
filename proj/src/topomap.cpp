#include "topoloc/topomap.hpp"

#include <glog/logging.h>

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "topoloc/error.hpp"

namespace topoloc {

void KdTree::build(const std::vector<Vec3>& points) {
  nodes_.clear();
  nodes_.reserve(points.size());
  std::vector<int> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  root_ = build_range(order, points, 0, static_cast<int>(points.size()), 0);
}

int KdTree::build_range(std::vector<int>& order, const std::vector<Vec3>& points, int begin,
                        int end, int depth) {
  if (begin >= end) {
    return -1;
  }
  const int axis = depth % 3;
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                   [&](int a, int b) {
                     if (points[a][axis] != points[b][axis]) return points[a][axis] < points[b][axis];
                     return a < b;
                   });
  const int index = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{points[order[mid]], order[mid], axis, -1, -1});
  const int left = build_range(order, points, begin, mid, depth + 1);
  const int right = build_range(order, points, mid + 1, end, depth + 1);
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

void KdTree::insert(const Vec3& point, int id) {
  const int index = static_cast<int>(nodes_.size());
  if (root_ < 0) {
    nodes_.push_back(Node{point, id, 0, -1, -1});
    root_ = index;
    return;
  }
  int cur = root_;
  while (true) {
    Node& n = nodes_[cur];
    const bool go_left = point[n.axis] < n.point[n.axis];
    int& child = go_left ? n.left : n.right;
    if (child < 0) {
      const int axis = (n.axis + 1) % 3;
      child = index;
      nodes_.push_back(Node{point, id, axis, -1, -1});
      return;
    }
    cur = child;
  }
}

int KdTree::nearest(const Vec3& query) const {
  double best_d2 = std::numeric_limits<double>::infinity();
  int best_id = -1;
  search(root_, query, best_d2, best_id);
  return best_id;
}

void KdTree::search(int index, const Vec3& query, double& best_d2, int& best_id) const {
  if (index < 0) {
    return;
  }
  const Node& n = nodes_[index];
  const double d2 = (n.point - query).squaredNorm();
  if (d2 < best_d2 || (d2 == best_d2 && n.id < best_id)) {
    best_d2 = d2;
    best_id = n.id;
  }
  const double diff = query[n.axis] - n.point[n.axis];
  const int near = diff < 0.0 ? n.left : n.right;
  const int far = diff < 0.0 ? n.right : n.left;
  search(near, query, best_d2, best_id);
  // <= keeps equidistant candidates on the far side reachable for the tie-break.
  if (diff * diff <= best_d2) {
    search(far, query, best_d2, best_id);
  }
}

int TopologicalMap::insert_node(TopoNode node) {
  if (node.depth.empty() || node.image.empty() || node.depth.width() != node.image.width() ||
      node.depth.height() != node.image.height()) {
    throw Error(ErrorCode::DimensionMismatch,
                "node depth " + std::to_string(node.depth.width()) + "x" +
                    std::to_string(node.depth.height()) + " vs image " +
                    std::to_string(node.image.width()) + "x" + std::to_string(node.image.height()));
  }
  for (const auto& existing : nodes_) {
    if (existing.timestamp == node.timestamp) {
      LOG(WARNING) << to_string(ErrorCode::DuplicateTimestamp) << ": node " << existing.node_id
                   << " already has timestamp " << node.timestamp;
      break;
    }
  }
  node.node_id = static_cast<int>(nodes_.size());
  index_.insert(node.pose.translation, node.node_id);
  nodes_.push_back(std::move(node));
  return nodes_.back().node_id;
}

const TopoNode& TopologicalMap::nearest_node(const Vec3& position) const {
  if (nodes_.empty()) {
    throw Error(ErrorCode::EmptyMap, "nearest_node on an empty map");
  }
  return nodes_[static_cast<size_t>(index_.nearest(position))];
}

void TopologicalMap::rebuild_index() {
  std::vector<Vec3> points;
  points.reserve(nodes_.size());
  for (const auto& n : nodes_) {
    points.push_back(n.pose.translation);
  }
  index_.build(points);
}

Vec3 depth_to_point(const DepthImage& depth, const CameraIntrinsics& intr, const ImagePoint& f) {
  const PixelIndex px = nearest_pixel(f.u, f.v);
  if (!std::isfinite(f.u) || !std::isfinite(f.v) || !depth.in_bounds(px.x, px.y)) {
    throw Error(ErrorCode::OutOfBounds, "feature (" + std::to_string(f.u) + ", " +
                                            std::to_string(f.v) + ") outside the depth image");
  }
  const float d = depth.at(px.x, px.y);
  if (!valid_depth(d)) {
    throw Error(ErrorCode::NoDepth, "no depth at pixel (" + std::to_string(px.x) + ", " +
                                        std::to_string(px.y) + ")");
  }
  return unproject(intr, f, static_cast<double>(d));
}

Vec3 depth_to_point(const TopoNode& node, const CameraIntrinsics& intr, const ImagePoint& f) {
  return depth_to_point(node.depth, intr, f);
}

Vec3 map_point_global(const TopoNode& node, const CameraIntrinsics& intr, const ImagePoint& f) {
  return node.pose * depth_to_point(node, intr, f);
}

}  // namespace topoloc
