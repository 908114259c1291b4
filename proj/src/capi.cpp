// SPDX-License-Identifier: Apache-2.0
#include "ncd/ncd.h"

#include "ncd/experiment.hpp"
#include "ncd/selftest.hpp"

#include <cstring>
#include <new>

struct ncd_config {
  ncd::exp::ExperimentConfig value;
};

struct ncd_mesh {
  ncd::mesh::Mesh value;
};

namespace {

thread_local std::string lastError;

ncd_status status_of(ncd::ErrorCode code) {
  switch (code) {
    case ncd::ErrorCode::kInvalidArgument: return NCD_ERR_INVALID_ARGUMENT;
    case ncd::ErrorCode::kDimensionMismatch: return NCD_ERR_DIMENSION_MISMATCH;
    case ncd::ErrorCode::kDegenerateInput: return NCD_ERR_DEGENERATE_INPUT;
    case ncd::ErrorCode::kParse: return NCD_ERR_PARSE;
    case ncd::ErrorCode::kNumerical: return NCD_ERR_NUMERICAL;
    case ncd::ErrorCode::kConfig: return NCD_ERR_CONFIG;
    case ncd::ErrorCode::kIo: return NCD_ERR_IO;
    case ncd::ErrorCode::kOracle: return NCD_ERR_ORACLE;
  }
  return NCD_ERR_INTERNAL;
}

template <class F>
ncd_status guard(F&& body) {
  try {
    body();
    lastError.clear();
    return NCD_OK;
  } catch (const ncd::Error& e) {
    lastError = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    lastError = "out of memory";
    return NCD_ERR_INTERNAL;
  } catch (const std::exception& e) {
    lastError = e.what();
    return NCD_ERR_INTERNAL;
  }
}

void require(bool condition, const char* what) {
  if (!condition) throw ncd::Error(ncd::ErrorCode::kInvalidArgument, what);
}

void copy_out(const std::string& text, char* buffer, size_t capacity, size_t* needed) {
  if (needed) *needed = text.size() + 1;
  if (!buffer) return;
  require(capacity > text.size(), "output buffer too small");
  std::memcpy(buffer, text.c_str(), text.size() + 1);
}

std::vector<ncd::Vec3> to_points(const double* xyz, size_t count) {
  std::vector<ncd::Vec3> points(count);
  for (size_t i = 0; i < count; ++i) points[i] = ncd::Vec3(xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]);
  return points;
}

}  // namespace

extern "C" {

const char* ncd_last_error_message(void) { return lastError.c_str(); }

const char* ncd_status_name(ncd_status status) {
  switch (status) {
    case NCD_OK: return "ok";
    case NCD_ERR_INVALID_ARGUMENT: return "invalid argument";
    case NCD_ERR_DIMENSION_MISMATCH: return "dimension mismatch";
    case NCD_ERR_DEGENERATE_INPUT: return "degenerate input";
    case NCD_ERR_PARSE: return "parse error";
    case NCD_ERR_NUMERICAL: return "numerical failure";
    case NCD_ERR_CONFIG: return "config error";
    case NCD_ERR_IO: return "i/o error";
    case NCD_ERR_ORACLE: return "oracle failure";
    case NCD_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* ncd_version(void) { return "1.0.0"; }

ncd_status ncd_config_create(ncd_config** out) {
  return guard([&] {
    require(out, "null output handle");
    *out = new ncd_config{};
  });
}

ncd_status ncd_config_load(const char* path, ncd_config** out) {
  return guard([&] {
    require(path && out, "null argument");
    *out = new ncd_config{ncd::exp::ExperimentConfig::load(path)};
  });
}

ncd_status ncd_config_parse(const char* text, ncd_config** out) {
  return guard([&] {
    require(text && out, "null argument");
    *out = new ncd_config{ncd::exp::ExperimentConfig::parse(text)};
  });
}

ncd_status ncd_config_set(ncd_config* config, const char* key, const char* value) {
  return guard([&] {
    require(config && key && value, "null argument");
    config->value.set(key, value);
  });
}

ncd_status ncd_config_get(const ncd_config* config, const char* key, char* buffer, size_t capacity, size_t* needed) {
  return guard([&] {
    require(config && key, "null argument");
    copy_out(config->value.get(key), buffer, capacity, needed);
  });
}

ncd_status ncd_config_to_text(const ncd_config* config, char* buffer, size_t capacity, size_t* needed) {
  return guard([&] {
    require(config, "null config");
    copy_out(config->value.to_text(), buffer, capacity, needed);
  });
}

ncd_status ncd_config_save(const ncd_config* config, const char* path) {
  return guard([&] {
    require(config && path, "null argument");
    config->value.save(path);
  });
}

void ncd_config_free(ncd_config* config) { delete config; }

ncd_status ncd_synth(const ncd_config* config, const char* out_dir, size_t* meshes, size_t* collision_free) {
  return guard([&] {
    require(config && out_dir, "null argument");
    const ncd::datagen::SynthResult r = ncd::exp::synth(config->value, out_dir);
    if (meshes) *meshes = r.meshes.size();
    if (collision_free) *collision_free = r.collisionFree;
  });
}

ncd_status ncd_train_autoencoder(const ncd_config* config, const char* data_dir, const char* ae_dir) {
  return guard([&] {
    require(config && data_dir && ae_dir, "null argument");
    ncd::exp::train_ae(config->value, data_dir, ae_dir);
  });
}

ncd_status ncd_run(const ncd_config* config, const char* ae_dir, const char* method, uint64_t seed,
                   const char* run_dir, size_t* final_dataset_size) {
  return guard([&] {
    require(config && ae_dir && method && run_dir, "null argument");
    const ncd::exp::Method m = ncd::exp::method_from_string(method);
    const ncd::exp::RunSummary s = ncd::exp::run_method(config->value, ae_dir, m, seed, run_dir);
    if (!s.partitionChecksPassed)
      throw ncd::Error(ncd::ErrorCode::kNumerical, "subset partition or boundary-loss check failed during the run");
    if (final_dataset_size) *final_dataset_size = s.finalSize;
  });
}

ncd_status ncd_eval_detection(const ncd_config* config, const char* ae_dir, const char* run_dir,
                              ncd_detection_metrics* out) {
  return guard([&] {
    require(config && ae_dir && run_dir, "null argument");
    const auto rows = ncd::exp::eval_detection(config->value, ae_dir, run_dir);
    if (out && !rows.empty())
      *out = {rows.back().datasetSize, rows.back().metrics.accuracy, rows.back().metrics.falseNegativeRate};
  });
}

ncd_status ncd_eval_handling(const ncd_config* config, const char* ae_dir, const char* run_dir, int final_only,
                             ncd_handling_metrics* out) {
  return guard([&] {
    require(config && ae_dir && run_dir, "null argument");
    const auto rows = ncd::exp::eval_handling(config->value, ae_dir, run_dir, final_only != 0);
    if (out && !rows.empty()) {
      const ncd::exp::HandlingRow& r = rows.back();
      *out = {r.datasetSize, r.trials, r.successRate, r.meanReduction, r.meanEmbeddingDifference, r.feasibleRate};
    }
  });
}

ncd_status ncd_report(const char* const* run_dirs, size_t count, const char* out_dir) {
  return guard([&] {
    require(run_dirs && out_dir, "null argument");
    std::vector<std::string> dirs;
    for (size_t i = 0; i < count; ++i) {
      require(run_dirs[i], "null run directory");
      dirs.emplace_back(run_dirs[i]);
    }
    ncd::exp::report(dirs, out_dir);
  });
}

ncd_status ncd_selftest(char* report, size_t capacity, size_t* needed, int* failures) {
  return guard([&] {
    std::string text;
    int failed = 0;
    for (const ncd::SelfTestResult& r : ncd::run_selftest()) {
      failed += r.passed ? 0 : 1;
      text += std::string(r.passed ? "PASS " : "FAIL ") + r.name + (r.detail.empty() ? "" : ": " + r.detail) + "\n";
    }
    if (failures) *failures = failed;
    copy_out(text, report, capacity, needed);
  });
}

ncd_status ncd_mesh_create(const double* vertices, size_t vertex_count, const int32_t* triangles,
                           size_t triangle_count, ncd_mesh** out) {
  return guard([&] {
    require(vertices && triangles && out, "null argument");
    ncd::mesh::Mesh m;
    m.vertices = to_points(vertices, vertex_count);
    m.restVertices = m.vertices;
    for (size_t t = 0; t < triangle_count; ++t) {
      const ncd::mesh::Face f{triangles[3 * t], triangles[3 * t + 1], triangles[3 * t + 2]};
      for (int v : f)
        if (v < 0 || static_cast<size_t>(v) >= vertex_count)
          throw ncd::Error(ncd::ErrorCode::kInvalidArgument, "triangle " + std::to_string(t) + " has an out-of-range index");
      m.triangles.push_back(f);
    }
    *out = new ncd_mesh{std::move(m)};
  });
}

ncd_status ncd_mesh_load_obj(const char* path, const char* rest_path, ncd_mesh** out) {
  return guard([&] {
    require(path && out, "null argument");
    *out = new ncd_mesh{rest_path ? ncd::mesh::read_mesh_pair(path, rest_path) : ncd::mesh::read_obj_file(path)};
  });
}

ncd_status ncd_mesh_set_vertices(ncd_mesh* mesh, const double* vertices, size_t vertex_count) {
  return guard([&] {
    require(mesh && vertices, "null argument");
    if (vertex_count != mesh->value.vertex_count())
      throw ncd::Error(ncd::ErrorCode::kDimensionMismatch, "vertex count differs from the mesh topology");
    mesh->value.vertices = to_points(vertices, vertex_count);
  });
}

size_t ncd_mesh_vertex_count(const ncd_mesh* mesh) { return mesh ? mesh->value.vertex_count() : 0; }

size_t ncd_mesh_triangle_count(const ncd_mesh* mesh) { return mesh ? mesh->value.triangles.size() : 0; }

ncd_status ncd_mesh_features(const ncd_mesh* mesh, double* features, size_t capacity) {
  return guard([&] {
    require(mesh && features, "null argument");
    const ncd::Vector f = ncd::mesh::feature_transform(mesh->value).values;
    if (capacity < static_cast<size_t>(f.size()))
      throw ncd::Error(ncd::ErrorCode::kDimensionMismatch, "feature buffer holds fewer than 3 * vertex_count values");
    std::copy(f.data(), f.data() + f.size(), features);
  });
}

void ncd_mesh_free(ncd_mesh* mesh) { delete mesh; }

ncd_status ncd_collision_query(const ncd_mesh* mesh, double coupling_radius, ncd_collision_result* out) {
  return guard([&] {
    require(mesh && out, "null argument");
    ncd::mesh::Mesh rest = ncd::mesh::with_vertices(mesh->value, mesh->value.restVertices);
    const ncd::geom::CollisionOracle oracle(std::move(rest), ncd::geom::DomainMap::single(mesh->value.vertex_count()),
                                            coupling_radius > 0.0 ? coupling_radius : -1.0);
    const ncd::geom::CollisionReport r = oracle.query(mesh->value);
    *out = {r.pd, r.label, r.pairs.size()};
  });
}

}  // extern "C"
