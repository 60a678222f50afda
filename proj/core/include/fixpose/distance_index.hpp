#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Geometry>

#include "fixpose/geometry.hpp"
#include "fixpose/mesh.hpp"

namespace fixpose {

struct ClosestPointResult {
  Vec3 point = Vec3::Zero();
  double distance = 0.0;
  std::uint32_t triangle = 0;  ///< index into the source mesh's triangle list
};

/// Closest point to `p` on the closed triangle (a, b, c).
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Median-split AABB tree over triangle centroids answering unsigned
/// point-to-surface distance queries. Immutable after construction; concurrent
/// queries are safe.
class DistanceIndex {
 public:
  explicit DistanceIndex(const TriangleMesh& mesh, int leaf_size = 4);

  ClosestPointResult closest_point(const Vec3& query) const;

  /// True iff some triangle lies within `radius` of `query`. Stops at the first hit.
  bool any_within(const Vec3& query, double radius) const;

  std::size_t triangle_count() const { return tris_.size(); }
  std::size_t node_count() const { return nodes_.size(); }
  const Eigen::AlignedBox3d& bounds() const { return nodes_.front().box; }

 private:
  struct Node {
    Eigen::AlignedBox3d box;
    std::uint32_t first = 0;  // first triangle (leaf) or left child (inner)
    std::uint32_t count = 0;  // triangle count; 0 marks an inner node
  };

  void build(std::uint32_t node, std::uint32_t first, std::uint32_t count,
             std::vector<Vec3>& centroids);

  int leaf_size_;
  std::vector<Node> nodes_;
  std::vector<std::array<Vec3, 3>> tris_;
  std::vector<std::uint32_t> source_ids_;
};

}  // namespace fixpose
