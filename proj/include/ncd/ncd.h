/* SPDX-License-Identifier: Apache-2.0 */
#ifndef NCD_NCD_H
#define NCD_NCD_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define NCD_API __declspec(dllexport)
#else
#define NCD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ncd_status {
  NCD_OK = 0,
  NCD_ERR_INVALID_ARGUMENT = 1,
  NCD_ERR_DIMENSION_MISMATCH = 2,
  NCD_ERR_DEGENERATE_INPUT = 3,
  NCD_ERR_PARSE = 4,
  NCD_ERR_NUMERICAL = 5,
  NCD_ERR_CONFIG = 6,
  NCD_ERR_IO = 7,
  NCD_ERR_ORACLE = 8,
  NCD_ERR_INTERNAL = 9
} ncd_status;

typedef struct ncd_config ncd_config;
typedef struct ncd_mesh ncd_mesh;

/* Message of the last failed call on this thread; empty after a success. */
NCD_API const char* ncd_last_error_message(void);
NCD_API const char* ncd_status_name(ncd_status status);
NCD_API const char* ncd_version(void);

/* Configuration. Strings returned through (buffer, capacity, needed) are
   NUL-terminated; `needed` receives the full length including the NUL and the
   call fails with NCD_ERR_INVALID_ARGUMENT when the buffer is too small. */
NCD_API ncd_status ncd_config_create(ncd_config** out);
NCD_API ncd_status ncd_config_load(const char* path, ncd_config** out);
NCD_API ncd_status ncd_config_parse(const char* text, ncd_config** out);
NCD_API ncd_status ncd_config_set(ncd_config* config, const char* key, const char* value);
NCD_API ncd_status ncd_config_get(const ncd_config* config, const char* key, char* buffer, size_t capacity,
                                  size_t* needed);
NCD_API ncd_status ncd_config_to_text(const ncd_config* config, char* buffer, size_t capacity, size_t* needed);
NCD_API ncd_status ncd_config_save(const ncd_config* config, const char* path);
NCD_API void ncd_config_free(ncd_config* config);

/* Pipeline stages. Each writes its artifacts into the given directory. */
NCD_API ncd_status ncd_synth(const ncd_config* config, const char* out_dir, size_t* meshes, size_t* collision_free);
NCD_API ncd_status ncd_train_autoencoder(const ncd_config* config, const char* data_dir, const char* ae_dir);
/* method: "active+bd", "supv+bd" or "supv". */
NCD_API ncd_status ncd_run(const ncd_config* config, const char* ae_dir, const char* method, uint64_t seed,
                           const char* run_dir, size_t* final_dataset_size);

typedef struct ncd_detection_metrics {
  size_t dataset_size;
  double accuracy;
  double false_negative_rate;
} ncd_detection_metrics;

typedef struct ncd_handling_metrics {
  size_t dataset_size;
  size_t trials;
  double success_rate;
  double mean_reduction;
  double mean_embedding_difference;
  double feasible_rate;
} ncd_handling_metrics;

/* Evaluates every checkpoint of a run; `out` receives the final checkpoint's metrics. */
NCD_API ncd_status ncd_eval_detection(const ncd_config* config, const char* ae_dir, const char* run_dir,
                                      ncd_detection_metrics* out);
NCD_API ncd_status ncd_eval_handling(const ncd_config* config, const char* ae_dir, const char* run_dir,
                                     int final_only, ncd_handling_metrics* out);
NCD_API ncd_status ncd_report(const char* const* run_dirs, size_t count, const char* out_dir);

/* Runs the built-in consistency checks; `report` receives one line per check. */
NCD_API ncd_status ncd_selftest(char* report, size_t capacity, size_t* needed, int* failures);

/* Meshes. Vertices are xyz triples, triangles 0-based index triples. The
   vertices given at creation are the rest pose. */
NCD_API ncd_status ncd_mesh_create(const double* vertices, size_t vertex_count, const int32_t* triangles,
                                   size_t triangle_count, ncd_mesh** out);
/* rest_path may be NULL, in which case the deformed file is its own rest pose. */
NCD_API ncd_status ncd_mesh_load_obj(const char* path, const char* rest_path, ncd_mesh** out);
NCD_API ncd_status ncd_mesh_set_vertices(ncd_mesh* mesh, const double* vertices, size_t vertex_count);
NCD_API size_t ncd_mesh_vertex_count(const ncd_mesh* mesh);
NCD_API size_t ncd_mesh_triangle_count(const ncd_mesh* mesh);
/* 3 * vertex_count values written into `features`. */
NCD_API ncd_status ncd_mesh_features(const ncd_mesh* mesh, double* features, size_t capacity);
NCD_API void ncd_mesh_free(ncd_mesh* mesh);

typedef struct ncd_collision_result {
  double pd; /* > 0: penetration depth, <= 0: minus the clearance */
  int label; /* 1 iff pd > 0 */
  size_t pair_count;
} ncd_collision_result;

/* Self-collision of the current pose. coupling_radius <= 0 selects the default. */
NCD_API ncd_status ncd_collision_query(const ncd_mesh* mesh, double coupling_radius, ncd_collision_result* out);

#ifdef __cplusplus
}
#endif

#endif
