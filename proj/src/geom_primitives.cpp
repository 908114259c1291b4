// SPDX-License-Identifier: Apache-2.0
#include "ncd/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ncd::geom {

double Aabb::distance(const Aabb& b) const {
  const Vec3 gap = (b.lo - hi).cwiseMax(lo - b.hi).cwiseMax(0.0);
  return gap.norm();
}

Aabb bounds(const Triangle& t) {
  Aabb box;
  for (const Vec3& p : t) box.expand(p);
  return box;
}

namespace {

double max_edge(const Triangle& t) {
  return std::max({(t[1] - t[0]).norm(), (t[2] - t[1]).norm(), (t[0] - t[2]).norm()});
}

void require_nondegenerate(const Triangle& t) {
  if (is_degenerate(t)) throw Error(ErrorCode::kDegenerateInput, "zero-area triangle");
}

struct SatOutcome {
  bool separated = false;
  double depth = std::numeric_limits<double>::infinity();
};

// Separating-axis test over the complete candidate set for two triangles.
// `depth` is the smallest interval overlap over axes on which at least one
// triangle has non-zero extent.
SatOutcome separating_axis(const Triangle& a, const Triangle& b) {
  const double scale = std::max(max_edge(a), max_edge(b));
  const double axisTol = 1e-12 * scale * scale;
  const double widthTol = 1e-12 * scale;

  const std::array<Vec3, 3> ea = {a[1] - a[0], a[2] - a[1], a[0] - a[2]};
  const std::array<Vec3, 3> eb = {b[1] - b[0], b[2] - b[1], b[0] - b[2]};
  const Vec3 na = ea[0].cross(a[2] - a[0]);
  const Vec3 nb = eb[0].cross(b[2] - b[0]);

  std::array<Vec3, 20> axes;
  std::size_t count = 0;
  axes[count++] = Vec3::UnitX();
  axes[count++] = Vec3::UnitY();
  axes[count++] = Vec3::UnitZ();
  axes[count++] = na;
  axes[count++] = nb;
  for (const Vec3& u : ea)
    for (const Vec3& v : eb) axes[count++] = u.cross(v);
  for (const Vec3& u : ea) axes[count++] = na.cross(u);
  for (const Vec3& v : eb) axes[count++] = nb.cross(v);

  SatOutcome out;
  for (std::size_t k = 0; k < count; ++k) {
    const double len = axes[k].norm();
    // Coordinate axes are unit length; the others scale like length^2 or ^3.
    if (k >= 3 && len <= axisTol * (k >= 14 ? scale : 1.0)) continue;
    const Vec3 axis = axes[k] / len;
    double loA = std::numeric_limits<double>::infinity(), hiA = -loA;
    double loB = loA, hiB = -loA;
    for (int i = 0; i < 3; ++i) {
      const double pa = axis.dot(a[i]);
      const double pb = axis.dot(b[i]);
      loA = std::min(loA, pa);
      hiA = std::max(hiA, pa);
      loB = std::min(loB, pb);
      hiB = std::max(hiB, pb);
    }
    if (hiA < loB || hiB < loA) {
      out.separated = true;
      return out;
    }
    if (hiA - loA <= widthTol && hiB - loB <= widthTol) continue;
    out.depth = std::min(out.depth, std::min(hiA - loB, hiB - loA));
  }
  return out;
}

Vec3 closest_point_on_triangle(const Vec3& p, const Triangle& t) {
  const Vec3& a = t[0];
  const Vec3& b = t[1];
  const Vec3& c = t[2];
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

double segment_segment_distance(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2) {
  const Vec3 d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
  const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
  double s = 0.0, t = 0.0;
  const double c = d1.dot(r);
  const double b = d1.dot(d2);
  const double denom = a * e - b * b;
  s = denom > 0.0 ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
  t = (b * s + f) / e;
  if (t < 0.0) {
    t = 0.0;
    s = std::clamp(-c / a, 0.0, 1.0);
  } else if (t > 1.0) {
    t = 1.0;
    s = std::clamp((b - c) / a, 0.0, 1.0);
  }
  return ((p1 + d1 * s) - (p2 + d2 * t)).norm();
}

double disjoint_distance(const Triangle& a, const Triangle& b) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    best = std::min(best, (a[i] - closest_point_on_triangle(a[i], b)).norm());
    best = std::min(best, (b[i] - closest_point_on_triangle(b[i], a)).norm());
  }
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      best = std::min(best, segment_segment_distance(a[i], a[(i + 1) % 3], b[j], b[(j + 1) % 3]));
  return best;
}

bool lexicographically_less(const Triangle& a, const Triangle& b) {
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) {
      if (a[i][k] < b[i][k]) return true;
      if (b[i][k] < a[i][k]) return false;
    }
  return false;
}

}  // namespace

bool is_degenerate(const Triangle& t) {
  const double e = max_edge(t);
  return !(e > 0.0) || (t[1] - t[0]).cross(t[2] - t[0]).norm() <= 1e-12 * e * e;
}

bool tri_tri_intersect(const Triangle& a, const Triangle& b) {
  require_nondegenerate(a);
  require_nondegenerate(b);
  return !separating_axis(a, b).separated;
}

double triangle_distance(const Triangle& a, const Triangle& b) {
  require_nondegenerate(a);
  require_nondegenerate(b);
  if (!separating_axis(a, b).separated) return 0.0;
  return disjoint_distance(a, b);
}

double pair_penetration(const Triangle& a, const Triangle& b) {
  require_nondegenerate(a);
  require_nondegenerate(b);
  const bool swap = lexicographically_less(b, a);
  const Triangle& first = swap ? b : a;
  const Triangle& second = swap ? a : b;
  const SatOutcome sat = separating_axis(first, second);
  if (sat.separated) return -disjoint_distance(first, second);
  return sat.depth;
}

bool share_vertex(const mesh::Face& a, const mesh::Face& b) {
  for (int i : a)
    for (int j : b)
      if (i == j) return true;
  return false;
}

}  // namespace ncd::geom
