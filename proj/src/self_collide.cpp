// SPDX-License-Identifier: Apache-2.0
#include "ncd/geom.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace ncd::geom {

CollisionReport self_collide(const mesh::Mesh& mesh, const Bvh& bvh, const DomainMap& domains,
                             const LocalCoupling& coupling) {
  if (domains.domainOf.size() != mesh.vertices.size())
    throw Error(ErrorCode::kDimensionMismatch, "self_collide: domain map does not cover every vertex");
  for (int d : domains.domainOf)
    if (d < 0 || d >= domains.count)
      throw Error(ErrorCode::kInvalidArgument, "self_collide: domain id " + std::to_string(d) + " out of range");

  CollisionReport report;
  report.pdPerDomain.assign(static_cast<std::size_t>(domains.count), 0.0);
  report.pairs = intersecting_pairs(mesh, bvh, &coupling);

  if (!report.pairs.empty()) {
    report.pd = 0.0;
    for (const auto& [i, j] : report.pairs) {
      const double depth = pair_penetration(mesh.triangle(i), mesh.triangle(j));
      report.pd = std::max(report.pd, depth);
      for (const mesh::Face* f : {&mesh.triangles[i], &mesh.triangles[j]})
        for (int v : *f) {
          double& slot = report.pdPerDomain[domains.domainOf[v]];
          slot = std::max(slot, depth);
        }
    }
  } else {
    const double separation = min_separation(mesh, bvh, coupling);
    report.pd = std::isfinite(separation) ? -separation : -mesh::bounding_box_diagonal(mesh.vertices);
  }
  report.label = report.pd > 0.0 ? 1 : 0;
  return report;
}

CollisionOracle::CollisionOracle(mesh::Mesh rest, DomainMap domains, double couplingRadius)
    : rest_(std::move(rest)), domains_(std::move(domains)) {
  if (domains_.domainOf.size() != rest_.restVertices.size())
    throw Error(ErrorCode::kDimensionMismatch, "CollisionOracle: domain map does not match the rest mesh");
  const double radius = couplingRadius < 0.0 ? LocalCoupling::default_radius(rest_) : couplingRadius;
  coupling_ = LocalCoupling(rest_, radius);
}

CollisionReport CollisionOracle::query(const mesh::Mesh& deformed) const {
  const Bvh bvh(deformed);
  return self_collide(deformed, bvh, domains_, coupling_);
}

CollisionReport CollisionOracle::query(const std::vector<Vec3>& vertices) const {
  return query(mesh::with_vertices(rest_, vertices));
}

std::string to_json(const CollisionReport& report) {
  nlohmann::json j;
  j["pd"] = report.pd;
  j["label"] = report.label;
  j["pair_count"] = report.pairs.size();
  j["pd_per_domain"] = report.pdPerDomain;
  return j.dump();
}

}  // namespace ncd::geom
