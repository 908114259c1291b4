// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "ncd/datagen.hpp"

#include <filesystem>

using namespace ncd;

namespace {

double diagonal(const mesh::Mesh& m) {
  Vec3 lo = m.vertices.front(), hi = m.vertices.front();
  for (const Vec3& v : m.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return (hi - lo).norm();
}

}  // namespace

TEST_CASE("zero samples give an empty dataset") {
  const datagen::SynthResult r = datagen::synth_dataset(datagen::PoseFamily::two_link(), 0, 1);
  CHECK(r.meshes.empty());
  CHECK(r.collision_free_fraction() == 0.0);
}

TEST_CASE("zero pose is the rest mesh and clears itself by a margin") {
  for (const auto& family : {datagen::PoseFamily::two_link(), datagen::PoseFamily::three_link()}) {
    const mesh::Mesh zero = family.pose_mesh(Vector::Zero(family.parameter_count()));
    for (std::size_t i = 0; i < zero.vertex_count(); ++i)
      CHECK((zero.vertices[i] - family.rest().vertices[i]).norm() < 1e-12);
    CHECK(mesh::validate_manifold(zero).valid());
    CHECK(mesh::is_closed(zero));
    const geom::CollisionOracle oracle(family.rest(), family.link_domains());
    const geom::CollisionReport r = oracle.query(zero);
    CHECK(r.label == 0);
    CHECK(-r.pd >= 0.01 * diagonal(zero));
  }
}

TEST_CASE("sampled poses mix colliding and free shapes and stay manifold") {
  const datagen::PoseFamily family = datagen::PoseFamily::two_link();
  const datagen::SynthResult r = datagen::synth_dataset(family, 200, 3);
  REQUIRE(r.meshes.size() == 200);
  CHECK(r.collision_free_fraction() > 0.2);
  CHECK(r.collision_free_fraction() < 0.8);
  for (const mesh::Mesh& m : r.meshes) CHECK(mesh::validate_manifold(m).valid());
  std::size_t free = 0;
  for (const auto& report : r.reports) free += report.label == 0 ? 1 : 0;
  CHECK(free == r.collisionFree);
  CHECK(r.training_meshes().size() == r.collisionFree);
}

TEST_CASE("generation is deterministic in the seed") {
  const datagen::PoseFamily family = datagen::PoseFamily::two_link();
  const datagen::SynthResult a = datagen::synth_dataset(family, 20, 9);
  const datagen::SynthResult b = datagen::synth_dataset(family, 20, 9);
  const datagen::SynthResult c = datagen::synth_dataset(family, 20, 10);
  bool differs = false;
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(a.poses[i] == b.poses[i]);
    CHECK(a.meshes[i].vertices == b.meshes[i].vertices);
    differs = differs || a.poses[i] != c.poses[i];
  }
  CHECK(differs);
}

TEST_CASE("a bend sweep crosses from free to colliding") {
  const datagen::PoseFamily family = datagen::PoseFamily::two_link();
  const geom::CollisionOracle oracle(family.rest(), family.link_domains());
  Vector p = Vector::Zero(2);
  const double first = oracle.query(family.pose_mesh(p)).pd;
  p[0] = family.spec().joints[0].bendMax;
  const double last = oracle.query(family.pose_mesh(p)).pd;
  CHECK(first < 0.0);
  CHECK(last > 0.0);
}

TEST_CASE("datasets round trip through the directory layout") {
  const datagen::PoseFamily family = datagen::PoseFamily::two_link();
  const datagen::SynthResult r = datagen::synth_dataset(family, 30, 4);
  const auto dir = std::filesystem::temp_directory_path() / "ncd_synth";
  std::filesystem::remove_all(dir);
  datagen::write_dataset(dir.string(), family, r, 4);
  const datagen::StoredDataset back = datagen::read_dataset(dir.string());
  CHECK(back.family == "two-link");
  REQUIRE(back.meshes.size() == 30);
  CHECK(back.rest.triangles == family.rest().triangles);
  for (std::size_t i = 0; i < 30; ++i) {
    CHECK(back.labels[i] == r.reports[i].label);
    double worst = 0.0;
    for (std::size_t v = 0; v < back.meshes[i].vertex_count(); ++v)
      worst = std::max(worst, (back.meshes[i].vertices[v] - r.meshes[i].vertices[v]).norm());
    CHECK(worst < 1e-9);
  }
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(datagen::PoseFamily::by_name("octopus"), Error);
}
