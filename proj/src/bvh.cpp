// SPDX-License-Identifier: Apache-2.0
#include "ncd/geom.hpp"

#include <algorithm>
#include <numeric>

namespace ncd::geom {

Bvh::Bvh(const mesh::Mesh& mesh, int leafSize) : leafSize_(std::max(1, leafSize)) {
  const std::size_t n = mesh.triangles.size();
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "build_bvh: mesh has no triangles");
  std::vector<Aabb> boxes(n);
  std::vector<Vec3> centroids(n);
  for (std::size_t t = 0; t < n; ++t) {
    const Triangle tri = mesh.triangle(t);
    boxes[t] = bounds(tri);
    centroids[t] = (tri[0] + tri[1] + tri[2]) / 3.0;
  }
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * n / leafSize_ + 1);
  build(0, static_cast<int>(n), boxes, centroids);
}

int Bvh::build(int begin, int end, const std::vector<Aabb>& boxes, const std::vector<Vec3>& centroids) {
  const int index = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Aabb box, centroidBox;
  for (int i = begin; i < end; ++i) {
    box.expand(boxes[order_[i]]);
    centroidBox.expand(centroids[order_[i]]);
  }
  nodes_[index].box = box;
  if (end - begin <= leafSize_) {
    nodes_[index].begin = begin;
    nodes_[index].count = end - begin;
    return index;
  }
  int axis = 0;
  (centroidBox.hi - centroidBox.lo).maxCoeff(&axis);
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
    const double ca = centroids[a][axis], cb = centroids[b][axis];
    return ca < cb || (ca == cb && a < b);
  });
  const int left = build(begin, mid, boxes, centroids);
  const int right = build(mid, end, boxes, centroids);
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

namespace {

// Visits every unordered pair of distinct triangles whose enclosing nodes pass
// `accept`. `accept` is re-evaluated on descent so it may tighten over time.
template <class Accept, class Visit>
class SelfTraversal {
 public:
  SelfTraversal(const Bvh& bvh, Accept accept, Visit visit) : bvh_(bvh), accept_(accept), visit_(visit) {}

  void run() { self(0); }

 private:
  void self(int n) {
    const Bvh::Node& node = bvh_.nodes()[n];
    if (node.leaf()) {
      const auto& tris = bvh_.leaf_triangles();
      for (int i = node.begin; i < node.begin + node.count; ++i)
        for (int j = i + 1; j < node.begin + node.count; ++j) visit_(tris[i], tris[j]);
      return;
    }
    self(node.left);
    self(node.right);
    pair(node.left, node.right);
  }

  void pair(int a, int b) {
    const Bvh::Node& na = bvh_.nodes()[a];
    const Bvh::Node& nb = bvh_.nodes()[b];
    if (!accept_(na.box, nb.box)) return;
    if (na.leaf() && nb.leaf()) {
      const auto& tris = bvh_.leaf_triangles();
      for (int i = na.begin; i < na.begin + na.count; ++i)
        for (int j = nb.begin; j < nb.begin + nb.count; ++j) visit_(tris[i], tris[j]);
      return;
    }
    const bool splitA = !na.leaf() && (nb.leaf() || na.count >= nb.count);
    if (splitA) {
      pair(na.left, b);
      pair(na.right, b);
    } else {
      pair(a, nb.left);
      pair(a, nb.right);
    }
  }

  const Bvh& bvh_;
  Accept accept_;
  Visit visit_;
};

template <class Accept, class Visit>
void traverse_self(const Bvh& bvh, Accept accept, Visit visit) {
  SelfTraversal<Accept, Visit>(bvh, accept, visit).run();
}

}  // namespace

std::vector<std::pair<int, int>> intersecting_pairs(const mesh::Mesh& mesh, const Bvh& bvh,
                                                    const LocalCoupling* coupling) {
  std::vector<std::pair<int, int>> pairs;
  traverse_self(
      bvh, [](const Aabb& a, const Aabb& b) { return a.overlaps(b); },
      [&](int i, int j) {
        const mesh::Face& fi = mesh.triangles[i];
        const mesh::Face& fj = mesh.triangles[j];
        if (share_vertex(fi, fj) || (coupling && coupling->coupled(i, j))) return;
        const Triangle ti = mesh.triangle(i), tj = mesh.triangle(j);
        if (!bounds(ti).overlaps(bounds(tj))) return;
        if (tri_tri_intersect(ti, tj)) pairs.emplace_back(std::min(i, j), std::max(i, j));
      });
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

double min_separation(const mesh::Mesh& mesh, const Bvh& bvh, const LocalCoupling& coupling) {
  double best = std::numeric_limits<double>::infinity();
  traverse_self(
      bvh, [&](const Aabb& a, const Aabb& b) { return a.distance(b) < best; },
      [&](int i, int j) {
        if (share_vertex(mesh.triangles[i], mesh.triangles[j]) || coupling.coupled(i, j)) return;
        const Triangle ti = mesh.triangle(i), tj = mesh.triangle(j);
        if (bounds(ti).distance(bounds(tj)) >= best) return;
        best = std::min(best, triangle_distance(ti, tj));
      });
  return best;
}

LocalCoupling::LocalCoupling(const mesh::Mesh& rest, double radius)
    : neighbours_(rest.triangles.size()), radius_(radius) {
  const mesh::Mesh restPose = mesh::with_vertices(rest, rest.restVertices);
  const Bvh bvh(restPose);
  traverse_self(
      bvh, [&](const Aabb& a, const Aabb& b) { return a.distance(b) <= radius; },
      [&](int i, int j) {
        if (triangle_distance(restPose.triangle(i), restPose.triangle(j)) <= radius) {
          neighbours_[i].push_back(j);
          neighbours_[j].push_back(i);
        }
      });
  for (auto& list : neighbours_) std::sort(list.begin(), list.end());
}

double LocalCoupling::default_radius(const mesh::Mesh& rest) {
  double total = 0.0;
  std::size_t count = 0;
  for (const mesh::Face& f : rest.triangles)
    for (int k = 0; k < 3; ++k) {
      total += (rest.restVertices[f[k]] - rest.restVertices[f[(k + 1) % 3]]).norm();
      ++count;
    }
  return count ? 3.0 * total / static_cast<double>(count) : 0.0;
}

bool LocalCoupling::coupled(int a, int b) const {
  if (neighbours_.empty()) return false;
  const auto& list = neighbours_[a];
  return std::binary_search(list.begin(), list.end(), b);
}

}  // namespace ncd::geom
