// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "../support/oracles.hpp"
#include "ncd/datagen.hpp"
#include "ncd/geom.hpp"

#include <json.hpp>

#include <random>

using namespace ncd;

namespace {

Triangle unit_triangle() { return {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}; }

Triangle random_triangle(std::mt19937_64& rng, double spread = 1.0) {
  std::normal_distribution<double> normal;
  return {Vec3(normal(rng), normal(rng), normal(rng)) * spread, Vec3(normal(rng), normal(rng), normal(rng)) * spread,
          Vec3(normal(rng), normal(rng), normal(rng)) * spread};
}

mesh::Mesh pose(const datagen::PoseFamily& family, double bend, double azimuth = 0.0) {
  Vector p(2);
  p << bend, azimuth;
  return family.pose_mesh(p);
}

double brute_min_separation(const mesh::Mesh& m, const geom::LocalCoupling& coupling) {
  double best = INFINITY;
  for (std::size_t a = 0; a < m.triangles.size(); ++a)
    for (std::size_t b = a + 1; b < m.triangles.size(); ++b) {
      if (geom::share_vertex(m.triangles[a], m.triangles[b]) || coupling.coupled(int(a), int(b))) continue;
      best = std::min(best, geom::triangle_distance(m.triangle(a), m.triangle(b)));
    }
  return best;
}

}  // namespace

TEST_CASE("BVH over one triangle is a single leaf") {
  mesh::Mesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  m.restVertices = m.vertices;
  m.triangles = {{0, 1, 2}};
  const geom::Bvh bvh(m);
  REQUIRE(bvh.nodes().size() == 1);
  CHECK(bvh.root().leaf());
  CHECK(bvh.root().count == 1);
}

TEST_CASE("BVH over two distant triangles splits into disjoint leaves") {
  mesh::Mesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(10, 0, 0), Vec3(11, 0, 0), Vec3(10, 1, 0)};
  m.restVertices = m.vertices;
  m.triangles = {{0, 1, 2}, {3, 4, 5}};
  const geom::Bvh bvh(m, 1);
  REQUIRE(bvh.nodes().size() == 3);
  const auto& root = bvh.root();
  REQUIRE(!root.leaf());
  const auto& l = bvh.nodes()[root.left];
  const auto& r = bvh.nodes()[root.right];
  CHECK(l.leaf());
  CHECK(r.leaf());
  CHECK(!l.box.overlaps(r.box));
}

TEST_CASE("BVH rejects an empty mesh") {
  mesh::Mesh m;
  CHECK_THROWS_AS(geom::Bvh{m}, Error);
}

TEST_CASE("BVH leaves partition the triangles and boxes nest") {
  const datagen::PoseFamily family = datagen::PoseFamily::two_link();
  const mesh::Mesh m = pose(family, 3.5, 0.4);
  const geom::Bvh bvh(m);
  std::vector<int> seen(m.triangles.size(), 0);
  std::function<geom::Aabb(int)> visit = [&](int id) {
    const auto& node = bvh.nodes()[id];
    geom::Aabb box;
    if (node.leaf()) {
      box = geom::bounds(m.triangle(bvh.leaf_triangles()[node.begin]));
      for (int i = 0; i < node.count; ++i) {
        const int t = bvh.leaf_triangles()[node.begin + i];
        ++seen[t];
        box.expand(geom::bounds(m.triangle(t)));
      }
    } else {
      box = visit(node.left);
      box.expand(visit(node.right));
    }
    CHECK(node.box.contains(box));
    return box;
  };
  visit(0);
  CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
}

TEST_CASE("tri_tri_intersect on the reference cases") {
  const Triangle t1 = unit_triangle();
  CHECK_FALSE(geom::tri_tri_intersect(t1, oracle::translated(t1, Vec3(10, 0, 0))));
  const Triangle t2{Vec3(0.2, 0.2, -1), Vec3(0.3, 0.2, 1), Vec3(0.2, 0.3, 1)};
  CHECK(geom::tri_tri_intersect(t1, t2));
  CHECK(oracle::clip_intersect(t1, t2));
  const Triangle sharedEdge{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.5, -1, 0.3)};
  CHECK(geom::tri_tri_intersect(t1, sharedEdge));
}

TEST_CASE("tri_tri_intersect agrees with the clipping oracle on random pairs") {
  std::mt19937_64 rng(21);
  int hits = 0;
  for (int i = 0; i < 3000; ++i) {
    const Triangle a = random_triangle(rng), b = random_triangle(rng);
    const bool expected = oracle::clip_intersect(a, b);
    hits += expected ? 1 : 0;
    REQUIRE(geom::tri_tri_intersect(a, b) == expected);
    REQUIRE(geom::tri_tri_intersect(b, a) == expected);
  }
  CHECK(hits > 100);
}

TEST_CASE("degenerate triangles are rejected explicitly") {
  const Triangle flat{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)};
  try {
    geom::tri_tri_intersect(flat, unit_triangle());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerateInput);
  }
  CHECK_THROWS_AS(geom::pair_penetration(unit_triangle(), flat), Error);
}

TEST_CASE("pair_penetration of a disjoint pair is minus its distance") {
  const Triangle t1 = unit_triangle();
  CHECK(geom::pair_penetration(t1, oracle::translated(t1, Vec3(0, 0, 0.5))) == doctest::Approx(-0.5).epsilon(1e-9));
  std::mt19937_64 rng(22);
  int checked = 0;
  for (int i = 0; i < 300 && checked < 100; ++i) {
    const Triangle a = random_triangle(rng), b = oracle::translated(random_triangle(rng), Vec3(3, 0, 0));
    if (oracle::clip_intersect(a, b)) continue;
    const double expected = oracle::triangle_distance(a, b);
    CHECK(geom::pair_penetration(a, b) == doctest::Approx(-expected).epsilon(1e-9));
    CHECK(oracle::sampled_distance(a, b, 20) >= expected - 1e-12);
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("pair_penetration of intersecting pairs matches direction sampling") {
  const Triangle t1 = unit_triangle();
  const Triangle crossing{Vec3(0.2, 0.2, -1), Vec3(0.3, 0.2, 1), Vec3(0.2, 0.3, 1)};
  const double sat = geom::pair_penetration(t1, crossing);
  const double sampled = oracle::sampled_penetration(t1, crossing, 6000, 5);
  CHECK(sat > 0.0);
  CHECK(sampled >= sat * (1.0 - 1e-6));
  CHECK(sampled <= sat * 1.05);
}

TEST_CASE("coincident triangles penetrate by their smallest in-plane extent") {
  const Triangle t1 = unit_triangle();
  const double sat = geom::pair_penetration(t1, t1);
  const double sampled = oracle::sampled_penetration(t1, t1, 6000, 6, Vec3::UnitZ());
  CHECK(sat > 0.0);
  CHECK(sampled >= sat * (1.0 - 1e-6));
  CHECK(sampled <= sat * 1.05);
}

TEST_CASE("pair_penetration is exactly symmetric") {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 500; ++i) {
    const Triangle a = random_triangle(rng), b = random_triangle(rng);
    CHECK(geom::pair_penetration(a, b) == geom::pair_penetration(b, a));
  }
}

TEST_CASE("rest pose is collision free with the brute-force clearance") {
  const datagen::PoseFamily family = datagen::PoseFamily::two_link();
  const geom::CollisionOracle oracle(family.rest(), family.link_domains());
  const geom::CollisionReport r = oracle.query(family.rest());
  CHECK(r.label == 0);
  CHECK(r.pairs.empty());
  CHECK(r.pd == doctest::Approx(-brute_min_separation(family.rest(), oracle.coupling())).epsilon(1e-12));
}

TEST_CASE("folded pose collides and matches brute force") {
  const datagen::PoseFamily family = datagen::PoseFamily::two_link();
  const geom::CollisionOracle oracle(family.rest(), family.link_domains());
  const mesh::Mesh folded = pose(family, 230.0 * M_PI / 180.0);
  const geom::CollisionReport r = oracle.query(folded);
  REQUIRE(r.label == 1);
  CHECK(r.pd > 0.0);
  CHECK(r.pairs == oracle::brute_force_pairs(folded, &oracle.coupling()));
  double maxPair = 0.0;
  for (const auto& [a, b] : r.pairs) maxPair = std::max(maxPair, geom::pair_penetration(folded.triangle(a), folded.triangle(b)));
  CHECK(r.pd == maxPair);
  CHECK(*std::max_element(r.pdPerDomain.begin(), r.pdPerDomain.end()) == r.pd);
}

TEST_CASE("BVH pair set equals brute force on random poses") {
  const datagen::PoseFamily family = datagen::PoseFamily::two_link();
  const geom::LocalCoupling coupling(family.rest(), geom::LocalCoupling::default_radius(family.rest()));
  std::mt19937_64 rng(24);
  int colliding = 0;
  for (int i = 0; i < 20; ++i) {
    const mesh::Mesh m = family.pose_mesh(family.sample_parameters(rng));
    const geom::Bvh bvh(m);
    const auto all = geom::intersecting_pairs(m, bvh);
    CHECK(all == oracle::brute_force_pairs(m));
    CHECK(geom::intersecting_pairs(m, bvh, &coupling) == oracle::brute_force_pairs(m, &coupling));
    colliding += all.empty() ? 0 : 1;
  }
  CHECK(colliding > 0);
}

TEST_CASE("report invariants hold on sampled poses") {
  const datagen::PoseFamily family = datagen::PoseFamily::two_link();
  const geom::CollisionOracle oracle(family.rest(), family.link_domains());
  std::mt19937_64 rng(25);
  for (int i = 0; i < 30; ++i) {
    const geom::CollisionReport r = oracle.query(family.pose_mesh(family.sample_parameters(rng)));
    CHECK(r.label == (r.pd > 0.0 ? 1 : 0));
    CHECK(r.pairs.empty() == (r.pd <= 0.0));
    CHECK(r.pdPerDomain.size() == static_cast<std::size_t>(family.link_domains().count));
    if (r.pd > 0.0) CHECK(*std::max_element(r.pdPerDomain.begin(), r.pdPerDomain.end()) == r.pd);
  }
}

TEST_CASE("pd rises through zero along a bend sweep") {
  const datagen::PoseFamily family = datagen::PoseFamily::two_link();
  const geom::CollisionOracle oracle(family.rest(), family.link_domains());
  double contact = -1.0;
  for (double deg = 150.0; deg <= 240.0; deg += 1.0)
    if (oracle.query(pose(family, deg * M_PI / 180.0)).pd > 0.0) {
      contact = deg;
      break;
    }
  REQUIRE(contact > 0.0);
  std::vector<double> pds;
  for (int i = 0; i <= 20; ++i) pds.push_back(oracle.query(pose(family, (contact - 2.5 + 0.25 * i) * M_PI / 180.0)).pd);
  CHECK(pds.front() < 0.0);
  CHECK(pds.back() > 0.0);
  for (std::size_t i = 1; i < pds.size(); ++i) CHECK(pds[i] >= pds[i - 1]);
}

TEST_CASE("oracle rejects a domain map of the wrong size") {
  const datagen::PoseFamily family = datagen::PoseFamily::two_link();
  CHECK_THROWS_AS(geom::CollisionOracle(family.rest(), geom::DomainMap::single(3)), Error);
}

TEST_CASE("collision report serialises its fields") {
  geom::CollisionReport r;
  r.pd = 0.25;
  r.label = 1;
  r.pdPerDomain = {0.25, 0.0};
  r.pairs = {{1, 7}};
  const nlohmann::json j = nlohmann::json::parse(geom::to_json(r));
  CHECK(j.at("pd").get<double>() == 0.25);
  CHECK(j.at("label").get<int>() == 1);
  CHECK(j.at("pair_count").get<int>() == 1);
  CHECK(j.at("pd_per_domain").size() == 2);
}
