// SPDX-License-Identifier: Apache-2.0
#include "ncd/mesh.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <map>

namespace ncd::mesh {

ValidationReport validate_manifold(const Mesh& mesh) {
  ValidationReport report;
  const int n = static_cast<int>(mesh.vertices.size());
  std::map<std::array<int, 2>, int> incidence;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const Face& f = mesh.triangles[t];
    bool inRange = true;
    for (int k = 0; k < 3; ++k) inRange = inRange && f[k] >= 0 && f[k] < n;
    if (!inRange) {
      report.violations.push_back({ManifoldViolation::Kind::kIndexOutOfRange, static_cast<int>(t)});
      continue;
    }
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) {
      report.violations.push_back({ManifoldViolation::Kind::kDegenerateTriangle, static_cast<int>(t)});
      continue;
    }
    for (int k = 0; k < 3; ++k) {
      const int a = f[k], b = f[(k + 1) % 3];
      ++incidence[{std::min(a, b), std::max(a, b)}];
    }
  }
  for (const auto& [edge, count] : incidence) {
    if (count > 2) {
      ManifoldViolation v{ManifoldViolation::Kind::kNonManifoldEdge};
      v.edge = edge;
      v.incidence = count;
      report.violations.push_back(v);
    }
  }
  return report;
}

bool is_closed(const Mesh& mesh) {
  std::map<std::array<int, 2>, int> incidence;
  for (const Face& f : mesh.triangles)
    for (int k = 0; k < 3; ++k) {
      const int a = f[k], b = f[(k + 1) % 3];
      ++incidence[{std::min(a, b), std::max(a, b)}];
    }
  return std::all_of(incidence.begin(), incidence.end(), [](const auto& e) { return e.second == 2; });
}

namespace {

Vec3 centroid(const std::vector<Vec3>& points) {
  Vec3 c = Vec3::Zero();
  for (const Vec3& p : points) c += p;
  return c / static_cast<double>(points.size());
}

// Flip each singular pair so the largest-magnitude entry of u is positive.
void fix_singular_signs(Eigen::Matrix3d& u, Eigen::Matrix3d& v) {
  for (int k = 0; k < 3; ++k) {
    Eigen::Index idx = 0;
    u.col(k).cwiseAbs().maxCoeff(&idx);
    if (u(idx, k) < 0.0) {
      u.col(k) = -u.col(k);
      v.col(k) = -v.col(k);
    }
  }
}

}  // namespace

RigidAlignment kabsch(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
  if (from.size() != to.size() || from.empty())
    throw Error(ErrorCode::kDimensionMismatch, "kabsch: point sets differ in size or are empty");
  const Vec3 cFrom = centroid(from);
  const Vec3 cTo = centroid(to);

  Eigen::Matrix3d spread = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < from.size(); ++i) {
    const Vec3 q = to[i] - cTo;
    spread += q * q.transpose();
    h += (from[i] - cFrom) * q.transpose();
  }
  const Eigen::Vector3d restSpread = Eigen::JacobiSVD<Eigen::Matrix3d>(spread).singularValues();
  if (!(restSpread(1) > 1e-12 * restSpread(0)))
    throw Error(ErrorCode::kDegenerateInput, "rest pose is collinear; rigid alignment is undefined");

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  fix_singular_signs(u, v);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;

  RigidAlignment out;
  out.rotation = v * d * u.transpose();
  out.translation = cTo - out.rotation * cFrom;
  return out;
}

FeatureVector feature_transform(const Mesh& mesh) {
  if (mesh.vertices.size() != mesh.restVertices.size())
    throw Error(ErrorCode::kDimensionMismatch, "feature_transform: deformed and rest vertex counts differ");
  const RigidAlignment align = kabsch(mesh.vertices, mesh.restVertices);
  FeatureVector f;
  f.values.resize(3 * static_cast<Eigen::Index>(mesh.vertices.size()));
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3 d = align.rotation * mesh.vertices[i] + align.translation - mesh.restVertices[i];
    f.values.segment<3>(3 * static_cast<Eigen::Index>(i)) = d;
  }
  return f;
}

Mesh feature_inverse(const FeatureVector& features, const Mesh& rest) {
  const auto n = static_cast<Eigen::Index>(rest.restVertices.size());
  if (features.values.size() != 3 * n)
    throw Error(ErrorCode::kDimensionMismatch, "feature_inverse: expected " + std::to_string(3 * n) +
                                                   " values, got " + std::to_string(features.values.size()));
  Mesh out;
  out.triangles = rest.triangles;
  out.restVertices = rest.restVertices;
  out.vertices.resize(rest.restVertices.size());
  for (Eigen::Index i = 0; i < n; ++i)
    out.vertices[i] = rest.restVertices[i] + features.values.segment<3>(3 * i);
  return out;
}

FeatureVector canonicalize(const FeatureVector& features, const Mesh& rest) {
  return feature_transform(feature_inverse(features, rest));
}

Mesh with_vertices(const Mesh& rest, std::vector<Vec3> vertices) {
  if (vertices.size() != rest.restVertices.size())
    throw Error(ErrorCode::kDimensionMismatch, "with_vertices: vertex count differs from rest pose");
  Mesh out;
  out.vertices = std::move(vertices);
  out.triangles = rest.triangles;
  out.restVertices = rest.restVertices;
  return out;
}

double bounding_box_diagonal(const std::vector<Vec3>& points) {
  if (points.empty()) return 0.0;
  Vec3 lo = points.front(), hi = points.front();
  for (const Vec3& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).norm();
}

}  // namespace ncd::mesh
