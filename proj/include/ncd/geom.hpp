// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ncd/mesh.hpp"

#include <utility>
#include <vector>

namespace ncd::geom {

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void expand(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void expand(const Aabb& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  bool contains(const Aabb& b) const { return (lo.array() <= b.lo.array()).all() && (b.hi.array() <= hi.array()).all(); }
  // Closed boxes: touching counts as overlap.
  bool overlaps(const Aabb& b) const { return (lo.array() <= b.hi.array()).all() && (b.lo.array() <= hi.array()).all(); }
  double distance(const Aabb& b) const;
};

Aabb bounds(const Triangle& t);

/// Binary AABB tree over triangle indices, median split on the longest axis of
/// the centroid bounds. Immutable after construction.
class Bvh {
 public:
  struct Node {
    Aabb box;
    int left = -1;   // child node indices, -1 for leaves
    int right = -1;
    int begin = 0;   // range into leafTriangles() for leaves
    int count = 0;
    bool leaf() const { return left < 0; }
  };

  static constexpr int kDefaultLeafSize = 4;

  explicit Bvh(const mesh::Mesh& mesh, int leafSize = kDefaultLeafSize);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<int>& leaf_triangles() const { return order_; }
  const Node& root() const { return nodes_.front(); }
  int leaf_size() const { return leafSize_; }

 private:
  int build(int begin, int end, const std::vector<Aabb>& boxes, const std::vector<Vec3>& centroids);

  std::vector<Node> nodes_;
  std::vector<int> order_;
  int leafSize_;
};

/// True iff the closed triangles share at least one point. Throws
/// kDegenerateInput for zero-area input.
bool tri_tri_intersect(const Triangle& a, const Triangle& b);

/// Signed per-pair penetration. Intersecting pairs give the smallest
/// separating translation over the candidate axis set (face normals, edge
/// cross products, in-plane edge normals, coordinate axes); disjoint pairs
/// give minus their Euclidean distance. Symmetric in its arguments.
double pair_penetration(const Triangle& a, const Triangle& b);

/// Euclidean distance between closed triangles (0 if they intersect).
double triangle_distance(const Triangle& a, const Triangle& b);

bool is_degenerate(const Triangle& t);

/// Vertex to domain assignment; domain ids are 0-based and < count.
struct DomainMap {
  std::vector<int> domainOf;
  int count = 1;

  static DomainMap single(std::size_t vertexCount) { return {std::vector<int>(vertexCount, 0), 1}; }
};

/// Pairs of triangles that lie within `radius` of each other in the rest pose.
/// Their distance is a property of mesh resolution rather than of the pose, so
/// they are left out of both the intersection and the separation measures.
class LocalCoupling {
 public:
  LocalCoupling() = default;
  LocalCoupling(const mesh::Mesh& rest, double radius);

  /// Default radius: 3 times the mean rest edge length.
  static double default_radius(const mesh::Mesh& rest);

  bool coupled(int a, int b) const;
  double radius() const { return radius_; }

 private:
  std::vector<std::vector<int>> neighbours_;  // sorted per triangle
  double radius_ = 0.0;
};

struct CollisionReport {
  double pd = 0.0;
  std::vector<double> pdPerDomain;
  std::vector<std::pair<int, int>> pairs;  // intersecting triangle pairs, i < j, sorted
  int label = 0;
};

/// Triangles sharing a vertex never count as a colliding pair.
bool share_vertex(const mesh::Face& a, const mesh::Face& b);

/// Intersecting non-adjacent pairs found through the BVH. When `coupling` is
/// given, rest-pose neighbours are skipped as well.
std::vector<std::pair<int, int>> intersecting_pairs(const mesh::Mesh& mesh, const Bvh& bvh,
                                                    const LocalCoupling* coupling = nullptr);

/// Smallest distance between non-adjacent, non-coupled triangles (infinity if none).
double min_separation(const mesh::Mesh& mesh, const Bvh& bvh, const LocalCoupling& coupling);

/// Self-collision report: pd is the largest pair penetration when any pair
/// intersects, otherwise minus the minimum separation.
CollisionReport self_collide(const mesh::Mesh& mesh, const Bvh& bvh, const DomainMap& domains,
                             const LocalCoupling& coupling);

/// Bundles the rest-pose data every query against one topology needs.
class CollisionOracle {
 public:
  CollisionOracle(mesh::Mesh rest, DomainMap domains, double couplingRadius = -1.0);

  CollisionReport query(const mesh::Mesh& deformed) const;
  CollisionReport query(const std::vector<Vec3>& vertices) const;

  const mesh::Mesh& rest() const { return rest_; }
  const DomainMap& domains() const { return domains_; }
  const LocalCoupling& coupling() const { return coupling_; }

 private:
  mesh::Mesh rest_;
  DomainMap domains_;
  LocalCoupling coupling_;
};

std::string to_json(const CollisionReport& report);

}  // namespace ncd::geom
