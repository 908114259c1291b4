// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "../support/oracles.hpp"
#include "ncd/datagen.hpp"
#include "ncd/mesh.hpp"

#include <random>
#include <sstream>

using namespace ncd;

TEST_CASE("tetrahedron is a valid closed manifold") {
  const mesh::Mesh m = oracle::tetrahedron();
  CHECK(mesh::validate_manifold(m).valid());
  CHECK(mesh::is_closed(m));
}

TEST_CASE("three triangles on one edge are reported on that edge") {
  mesh::Mesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, -1, 0), Vec3(0, 0, 1)};
  m.triangles = {{0, 1, 2}, {1, 0, 3}, {0, 1, 4}};
  m.restVertices = m.vertices;
  const mesh::ValidationReport r = mesh::validate_manifold(m);
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0].kind == mesh::ManifoldViolation::Kind::kNonManifoldEdge);
  CHECK(r.violations[0].edge == std::array<int, 2>{0, 1});
  CHECK(r.violations[0].incidence == 3);
}

TEST_CASE("degenerate and out-of-range triangles are reported") {
  mesh::Mesh m = oracle::tetrahedron();
  m.triangles.push_back({0, 0, 1});
  m.triangles.push_back({0, 1, 9});
  const mesh::ValidationReport r = mesh::validate_manifold(m);
  bool degenerate = false, range = false;
  for (const auto& v : r.violations) {
    degenerate = degenerate || v.kind == mesh::ManifoldViolation::Kind::kDegenerateTriangle;
    range = range || v.kind == mesh::ManifoldViolation::Kind::kIndexOutOfRange;
  }
  CHECK(degenerate);
  CHECK(range);
}

TEST_CASE("manifold validation agrees with brute-force edge incidence") {
  const datagen::PoseFamily family = datagen::PoseFamily::two_link();
  mesh::Mesh m = family.rest();
  std::vector<std::array<int, 2>> edges;
  std::vector<int> counts = oracle::brute_edge_incidence(m, edges);
  bool allTwo = std::all_of(counts.begin(), counts.end(), [](int c) { return c == 2; });
  CHECK(allTwo);
  CHECK(mesh::validate_manifold(m).valid() == allTwo);

  m.triangles.push_back({m.triangles[0][1], m.triangles[0][0], static_cast<int>(m.vertex_count()) - 1});
  counts = oracle::brute_edge_incidence(m, edges);
  std::size_t overfull = 0;
  for (int c : counts) overfull += c > 2 ? 1 : 0;
  std::size_t reported = 0;
  for (const auto& v : mesh::validate_manifold(m).violations)
    reported += v.kind == mesh::ManifoldViolation::Kind::kNonManifoldEdge && v.incidence > 2 ? 1 : 0;
  CHECK(overfull >= 1);
  CHECK(reported == overfull);
}

TEST_CASE("feature transform of the rest pose is zero") {
  const mesh::Mesh rest = datagen::PoseFamily::two_link().rest();
  CHECK(mesh::feature_transform(rest).values.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("rotated and translated rest pose has zero features") {
  const mesh::Mesh rest = datagen::PoseFamily::two_link().rest();
  const Eigen::Matrix3d r = Eigen::AngleAxisd(M_PI / 2, Vec3::UnitZ()).toRotationMatrix();
  std::vector<Vec3> moved;
  for (const Vec3& v : rest.vertices) moved.push_back(r * v + Vec3(1, 2, 3));
  CHECK(mesh::feature_transform(mesh::with_vertices(rest, moved)).values.cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("feature transform is invariant under 100 random rigid motions") {
  const datagen::PoseFamily family = datagen::PoseFamily::two_link();
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const mesh::Mesh bent = family.pose_mesh(family.sample_parameters(rng));
    const Eigen::Matrix3d r = oracle::random_rotation(rng);
    const Vec3 t(5 * normal(rng), 5 * normal(rng), 5 * normal(rng));
    std::vector<Vec3> moved;
    for (const Vec3& v : bent.vertices) moved.push_back(r * v + t);
    const Vector a = mesh::feature_transform(bent).values;
    const Vector b = mesh::feature_transform(mesh::with_vertices(bent, moved)).values;
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("feature inverse round trips 100 random feature vectors") {
  const mesh::Mesh rest = datagen::PoseFamily::two_link().rest();
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    Vector raw(3 * static_cast<Eigen::Index>(rest.vertex_count()));
    for (Eigen::Index k = 0; k < raw.size(); ++k) raw[k] = 0.05 * normal(rng);
    const mesh::FeatureVector f = mesh::canonicalize({raw}, rest);
    const mesh::FeatureVector back = mesh::feature_transform(mesh::feature_inverse(f, rest));
    worst = std::max(worst, (f.values - back.values).cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("zero features invert to the rest mesh exactly") {
  const mesh::Mesh rest = datagen::PoseFamily::two_link().rest();
  const mesh::Mesh back =
      mesh::feature_inverse({Vector::Zero(3 * static_cast<Eigen::Index>(rest.vertex_count()))}, rest);
  for (std::size_t i = 0; i < rest.vertex_count(); ++i) CHECK(back.vertices[i] == rest.vertices[i]);
}

TEST_CASE("feature inverse of a mesh's features is rigidly equivalent to it") {
  const datagen::PoseFamily family = datagen::PoseFamily::two_link();
  std::mt19937_64 rng(9);
  const mesh::Mesh m = family.pose_mesh(family.sample_parameters(rng));
  const mesh::Mesh back = mesh::feature_inverse(mesh::feature_transform(m), family.rest());
  const mesh::RigidAlignment fit = mesh::kabsch(m.vertices, back.vertices);
  double worst = 0.0;
  for (std::size_t i = 0; i < m.vertex_count(); ++i)
    worst = std::max(worst, (fit.rotation * m.vertices[i] + fit.translation - back.vertices[i]).norm());
  CHECK(worst <= 1e-9);
}

TEST_CASE("feature inverse rejects a wrong length") {
  const mesh::Mesh rest = oracle::tetrahedron();
  CHECK_THROWS_AS(mesh::feature_inverse({Vector::Zero(5)}, rest), Error);
}

TEST_CASE("collinear rest pose makes the alignment undefined") {
  mesh::Mesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)};
  m.restVertices = m.vertices;
  m.triangles = {{0, 1, 2}};
  try {
    mesh::feature_transform(m);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerateInput);
  }
}

TEST_CASE("OBJ round trip and parse errors name the line") {
  const mesh::Mesh m = oracle::tetrahedron();
  std::stringstream buffer;
  mesh::write_obj(buffer, m.vertices, m.triangles);
  const mesh::Mesh back = mesh::read_obj(buffer);
  CHECK(back.triangles == m.triangles);
  for (std::size_t i = 0; i < m.vertex_count(); ++i) CHECK((back.vertices[i] - m.vertices[i]).norm() == 0.0);

  std::stringstream bad("v 0 0 0\nv 1 0 0\nvn 0 0 1\n");
  try {
    mesh::read_obj(bad);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kParse);
    CHECK(std::string(e.what()).find('3') != std::string::npos);
  }
}

TEST_CASE("feature file round trip and header check") {
  mesh::FeatureVector f{Vector::LinSpaced(9, -1.0, 1.0)};
  std::stringstream buffer;
  mesh::write_features(buffer, f);
  CHECK(buffer.str().size() == 16 + 9 * 8);
  CHECK(mesh::read_features(buffer).values == f.values);
  std::stringstream bad("XXXXxxxxxxxxxxxxxxxxxxxx");
  CHECK_THROWS_AS(mesh::read_features(bad), Error);
}
