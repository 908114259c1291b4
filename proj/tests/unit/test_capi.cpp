// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ncd/ncd.h"

#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

namespace {

const std::vector<double> kTetra = {1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, 1};
const std::vector<int32_t> kTetraFaces = {0, 1, 2, 0, 3, 1, 0, 2, 3, 1, 3, 2};

}  // namespace

TEST_CASE("status names and version are available") {
  CHECK(std::string(ncd_status_name(NCD_OK)) == "ok");
  CHECK(std::strlen(ncd_status_name(NCD_ERR_CONFIG)) > 0);
  CHECK(std::strlen(ncd_version()) > 0);
}

TEST_CASE("config handles set, get and text export through caller buffers") {
  ncd_config* config = nullptr;
  REQUIRE(ncd_config_create(&config) == NCD_OK);
  CHECK(ncd_config_set(config, "n_init", "321") == NCD_OK);
  char value[32];
  size_t needed = 0;
  REQUIRE(ncd_config_get(config, "n_init", value, sizeof value, &needed) == NCD_OK);
  CHECK(std::string(value) == "321");
  CHECK(needed == 4);

  CHECK(ncd_config_set(config, "n_init", "-3") == NCD_ERR_CONFIG);
  CHECK(std::strlen(ncd_last_error_message()) > 0);
  CHECK(ncd_config_set(config, "bogus", "1") == NCD_ERR_CONFIG);

  char tiny[4];
  CHECK(ncd_config_to_text(config, tiny, sizeof tiny, &needed) == NCD_ERR_INVALID_ARGUMENT);
  std::vector<char> text(needed);
  REQUIRE(ncd_config_to_text(config, text.data(), text.size(), &needed) == NCD_OK);
  CHECK(std::strlen(ncd_last_error_message()) == 0);

  ncd_config* parsed = nullptr;
  REQUIRE(ncd_config_parse(text.data(), &parsed) == NCD_OK);
  REQUIRE(ncd_config_get(parsed, "n_init", value, sizeof value, &needed) == NCD_OK);
  CHECK(std::string(value) == "321");
  CHECK(ncd_config_parse("nope = 1\n", &parsed) != NCD_OK);
  CHECK(ncd_config_create(nullptr) == NCD_ERR_INVALID_ARGUMENT);
  ncd_config_free(parsed);
  ncd_config_free(config);
}

TEST_CASE("mesh queries report features and collisions") {
  ncd_mesh* mesh = nullptr;
  REQUIRE(ncd_mesh_create(kTetra.data(), 4, kTetraFaces.data(), 4, &mesh) == NCD_OK);
  CHECK(ncd_mesh_vertex_count(mesh) == 4);
  CHECK(ncd_mesh_triangle_count(mesh) == 4);

  std::vector<double> features(12, 1.0);
  REQUIRE(ncd_mesh_features(mesh, features.data(), features.size()) == NCD_OK);
  for (double f : features) CHECK(std::abs(f) < 1e-12);
  CHECK(ncd_mesh_features(mesh, features.data(), 3) == NCD_ERR_DIMENSION_MISMATCH);

  ncd_collision_result result{};
  REQUIRE(ncd_collision_query(mesh, 0.0, &result) == NCD_OK);
  CHECK(result.label == 0);
  CHECK(result.pair_count == 0);

  CHECK(ncd_mesh_set_vertices(mesh, kTetra.data(), 3) == NCD_ERR_DIMENSION_MISMATCH);
  ncd_mesh_free(mesh);

  const std::vector<int32_t> badFaces = {0, 1, 9};
  CHECK(ncd_mesh_create(kTetra.data(), 4, badFaces.data(), 1, &mesh) != NCD_OK);
  CHECK(ncd_mesh_load_obj("/nonexistent/file.obj", nullptr, &mesh) == NCD_ERR_IO);
}

TEST_CASE("two crossing slabs collide through the C interface") {
  const std::vector<double> v = {0, 0, 0, 1, 0, 0, 0, 1, 0, 0.2, 0.2, -1, 0.3, 0.2, 1, 0.2, 0.3, 1};
  const std::vector<int32_t> f = {0, 1, 2, 3, 4, 5};
  ncd_mesh* mesh = nullptr;
  REQUIRE(ncd_mesh_create(v.data(), 6, f.data(), 2, &mesh) == NCD_OK);
  std::vector<double> rest = v;
  for (std::size_t i = 9; i < rest.size(); i += 3) rest[i] += 5.0;
  ncd_mesh_free(mesh);
  REQUIRE(ncd_mesh_create(rest.data(), 6, f.data(), 2, &mesh) == NCD_OK);
  REQUIRE(ncd_mesh_set_vertices(mesh, v.data(), 6) == NCD_OK);
  ncd_collision_result result{};
  REQUIRE(ncd_collision_query(mesh, 0.0, &result) == NCD_OK);
  CHECK(result.label == 1);
  CHECK(result.pd > 0.0);
  CHECK(result.pair_count == 1);
  ncd_mesh_free(mesh);
}

TEST_CASE("selftest passes through the C interface") {
  size_t needed = 0;
  int failures = -1;
  REQUIRE(ncd_selftest(nullptr, 0, &needed, &failures) == NCD_OK);
  CHECK(needed > 1);
  std::vector<char> small(2);
  CHECK(ncd_selftest(small.data(), small.size(), &needed, &failures) == NCD_ERR_INVALID_ARGUMENT);
  std::vector<char> report(needed);
  REQUIRE(ncd_selftest(report.data(), report.size(), &needed, &failures) == NCD_OK);
  CHECK(failures == 0);
  CHECK(std::string(report.data()).find("PASS") != std::string::npos);
}

TEST_CASE("pipeline entry points validate their arguments") {
  ncd_config* config = nullptr;
  REQUIRE(ncd_config_create(&config) == NCD_OK);
  size_t size = 0;
  CHECK(ncd_run(config, "/nonexistent", "nonsense", 0, "/tmp/x", &size) != NCD_OK);
  CHECK(ncd_train_autoencoder(config, "/nonexistent/data", "/tmp/ncd_ae_none") != NCD_OK);
  CHECK(ncd_report(nullptr, 0, "/tmp") == NCD_ERR_INVALID_ARGUMENT);
  ncd_config_free(config);
}
