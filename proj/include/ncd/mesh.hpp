// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ncd/common.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace ncd::mesh {

using Face = std::array<int, 3>;

/// Fixed-topology triangle mesh: a deformed pose plus the rest pose it is
/// measured against. All meshes of one dataset share `triangles`.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Face> triangles;
  std::vector<Vec3> restVertices;

  std::size_t vertex_count() const { return vertices.size(); }
  Triangle triangle(std::size_t t) const {
    const Face& f = triangles[t];
    return {vertices[f[0]], vertices[f[1]], vertices[f[2]]};
  }
};

struct ManifoldViolation {
  enum class Kind { kIndexOutOfRange, kDegenerateTriangle, kNonManifoldEdge };
  Kind kind;
  int triangle = -1;          // offending triangle for index/degenerate violations
  std::array<int, 2> edge{};  // sorted vertex pair for edge violations
  int incidence = 0;          // number of triangles on the edge
};

struct ValidationReport {
  std::vector<ManifoldViolation> violations;
  bool valid() const { return violations.empty(); }
};

ValidationReport validate_manifold(const Mesh& mesh);

/// True iff every undirected edge has exactly two incident triangles.
bool is_closed(const Mesh& mesh);

/// Rigid-aligned displacement field, 3 entries per vertex (x, y, z).
struct FeatureVector {
  Vector values;
};

/// Least-squares rigid alignment (rotation + translation) taking `from` onto `to`.
struct RigidAlignment {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vec3 translation = Vec3::Zero();
};

/// Kabsch alignment with a proper rotation (det +1). Throws kDegenerateInput when
/// `to` is collinear, which leaves the rotation undetermined.
RigidAlignment kabsch(const std::vector<Vec3>& from, const std::vector<Vec3>& to);

/// Displacements of the deformed vertices from the rest pose after removing the
/// optimal rigid motion. Invariant under any rigid motion of `mesh.vertices`.
FeatureVector feature_transform(const Mesh& mesh);

/// Mesh whose vertices are rest + features in the rest frame. Exact inverse of
/// feature_transform on its image (canonical features).
Mesh feature_inverse(const FeatureVector& features, const Mesh& rest);

/// Projects an arbitrary displacement field onto the canonical frame.
FeatureVector canonicalize(const FeatureVector& features, const Mesh& rest);

/// Same topology and rest pose, new deformed vertices.
Mesh with_vertices(const Mesh& rest, std::vector<Vec3> vertices);

double bounding_box_diagonal(const std::vector<Vec3>& points);

// OBJ subset: `v x y z` and `f i j k` (1-based) lines, blank lines and `#`
// comments. Anything else is a kParse error naming the line.
Mesh read_obj(std::istream& in);
Mesh read_obj_file(const std::string& path);
void write_obj(std::ostream& out, const std::vector<Vec3>& vertices, const std::vector<Face>& triangles);
void write_obj_file(const std::string& path, const std::vector<Vec3>& vertices,
                    const std::vector<Face>& triangles);

/// Loads a deformed pose and its rest pose; the two files must share topology.
Mesh read_mesh_pair(const std::string& deformedPath, const std::string& restPath);

// Binary feature file: magic "NCDF", uint32 version, uint64 length, then
// `length` little-endian float64 values.
void write_features(std::ostream& out, const FeatureVector& features);
FeatureVector read_features(std::istream& in);

}  // namespace ncd::mesh
