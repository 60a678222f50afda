#include "fixpose/distance_index.hpp"

#include <algorithm>
#include <limits>

namespace fixpose {

// Region-based closest point, after Ericson, "Real-Time Collision Detection", 5.1.5.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }

  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

DistanceIndex::DistanceIndex(const TriangleMesh& mesh, int leaf_size) : leaf_size_(std::max(1, leaf_size)) {
  const auto n = static_cast<std::uint32_t>(mesh.triangles.size());
  tris_.reserve(n);
  source_ids_.resize(n);
  std::vector<Vec3> centroids(n);
  for (std::uint32_t t = 0; t < n; ++t) {
    tris_.push_back(mesh.corners(t));
    source_ids_[t] = t;
    centroids[t] = (tris_[t][0] + tris_[t][1] + tris_[t][2]) / 3.0;
  }
  nodes_.reserve(n > 0 ? 2 * n : 1);
  nodes_.emplace_back();
  if (n > 0) build(0, 0, n, centroids);
}

void DistanceIndex::build(std::uint32_t node, std::uint32_t first, std::uint32_t count,
                          std::vector<Vec3>& centroids) {
  Eigen::AlignedBox3d box;
  Eigen::AlignedBox3d centroid_box;
  for (std::uint32_t i = first; i < first + count; ++i) {
    for (const Vec3& v : tris_[i]) box.extend(v);
    centroid_box.extend(centroids[i]);
  }
  nodes_[node].box = box;

  if (count <= static_cast<std::uint32_t>(leaf_size_)) {
    nodes_[node].first = first;
    nodes_[node].count = count;
    return;
  }

  int axis = 0;
  centroid_box.sizes().maxCoeff(&axis);
  const std::uint32_t half = count / 2;

  // Sort a permutation, then apply it to all three parallel arrays.
  std::vector<std::uint32_t> order(count);
  for (std::uint32_t i = 0; i < count; ++i) order[i] = first + i;
  std::nth_element(order.begin(), order.begin() + half, order.end(),
                   [&](std::uint32_t l, std::uint32_t r) {
                     if (centroids[l][axis] != centroids[r][axis]) return centroids[l][axis] < centroids[r][axis];
                     return l < r;
                   });
  std::vector<std::array<Vec3, 3>> tris(count);
  std::vector<std::uint32_t> ids(count);
  std::vector<Vec3> cents(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    tris[i] = tris_[order[i]];
    ids[i] = source_ids_[order[i]];
    cents[i] = centroids[order[i]];
  }
  std::copy(tris.begin(), tris.end(), tris_.begin() + first);
  std::copy(ids.begin(), ids.end(), source_ids_.begin() + first);
  std::copy(cents.begin(), cents.end(), centroids.begin() + first);

  const auto left = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  nodes_.emplace_back();
  nodes_[node].first = left;
  nodes_[node].count = 0;
  build(left, first, half, centroids);
  build(left + 1, first + half, count - half, centroids);
}

ClosestPointResult DistanceIndex::closest_point(const Vec3& query) const {
  ClosestPointResult best;
  double best_d2 = std::numeric_limits<double>::infinity();
  if (tris_.empty()) {
    best.distance = best_d2;
    return best;
  }

  struct Entry {
    std::uint32_t node;
    double d2;
  };
  Entry stack[64];
  int top = 0;
  stack[top++] = {0, nodes_[0].box.squaredExteriorDistance(query)};

  while (top > 0) {
    const Entry e = stack[--top];
    if (e.d2 >= best_d2) continue;
    const Node& node = nodes_[e.node];
    if (node.count > 0) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const auto& t = tris_[i];
        const Vec3 cp = closest_point_on_triangle(query, t[0], t[1], t[2]);
        const double d2 = (cp - query).squaredNorm();
        if (d2 < best_d2) {
          best_d2 = d2;
          best.point = cp;
          best.triangle = source_ids_[i];
        }
      }
      continue;
    }
    const std::uint32_t l = node.first;
    const double dl = nodes_[l].box.squaredExteriorDistance(query);
    const double dr = nodes_[l + 1].box.squaredExteriorDistance(query);
    // Nearer child is popped first.
    if (dl <= dr) {
      stack[top++] = {l + 1, dr};
      stack[top++] = {l, dl};
    } else {
      stack[top++] = {l, dl};
      stack[top++] = {l + 1, dr};
    }
  }
  best.distance = std::sqrt(best_d2);
  return best;
}

bool DistanceIndex::any_within(const Vec3& query, double radius) const {
  if (tris_.empty() || radius < 0.0) return false;
  const double r2 = radius * radius;
  std::uint32_t stack[64];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (node.box.squaredExteriorDistance(query) > r2) continue;
    if (node.count > 0) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const auto& t = tris_[i];
        if ((closest_point_on_triangle(query, t[0], t[1], t[2]) - query).squaredNorm() <= r2) return true;
      }
      continue;
    }
    const std::uint32_t l = node.first;
    const double dl = nodes_[l].box.squaredExteriorDistance(query);
    const double dr = nodes_[l + 1].box.squaredExteriorDistance(query);
    if (dl <= dr) {
      stack[top++] = l + 1;
      stack[top++] = l;
    } else {
      stack[top++] = l;
      stack[top++] = l + 1;
    }
  }
  return false;
}

}  // namespace fixpose
