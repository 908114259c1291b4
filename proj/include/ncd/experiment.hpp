// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ncd/active.hpp"
#include "ncd/datagen.hpp"
#include "ncd/handler.hpp"

#include <memory>
#include <string>
#include <vector>

namespace ncd::exp {

enum class Method { kActiveBd, kSupvBd, kSupv };
const char* to_string(Method m);
Method method_from_string(const std::string& name);

/// Every tunable of an experiment. Serialised as `key = value` lines; unknown
/// keys are rejected.
struct ExperimentConfig {
  // dataset
  std::string family = "two-link";
  std::size_t synthCount = 1000;
  std::uint64_t synthSeed = 0;
  // autoencoder
  ae::AutoencoderConfig autoencoder{8, 4, 128, 0.01, 0.01, 1e-4, 128, 150, 0};
  // detector
  int cseWidth = 64;
  int stateSize = 16;
  int cpWidth = 32;
  int classifierWidth = 32;
  double celuAlpha = 1.0;
  // active learning
  double eps = 1e-4;
  active::ProjectionConfig projection;
  double alphaScale = 0.05;
  active::LossWeights weights;
  std::size_t rankPairs = 4096;
  std::size_t nInit = 2000;
  std::size_t nAug = 500;
  int iterations = 4;
  active::TrainSchedule bootstrapSchedule{1e-3, 512, 100};
  active::TrainSchedule fineTuneSchedule{1e-4, 1024, 50};
  double validationFraction = 0.2;
  // evaluation
  std::size_t nTest = 20000;
  std::uint64_t testSeed = 1000003;
  std::size_t handlingTrials = 200;
  std::uint64_t handlingSeed = 2000003;
  handler::AlmConfig alm;
  // runs
  Method method = Method::kActiveBd;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};

  std::string to_text() const;
  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  void save(const std::string& path) const;
  /// Throws kConfig on out-of-range values.
  void validate() const;
  /// Sets one key from its text form; the config is unchanged when the result is invalid.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static std::vector<std::string> keys();

  det::DetectorConfig detector_config(std::uint64_t seed) const;
  bool operator==(const ExperimentConfig& other) const { return to_text() == other.to_text(); }
};

/// Writes the synthetic mesh dataset and its generation report into `outDir`.
datagen::SynthResult synth(const ExperimentConfig& config, const std::string& outDir);

/// Trained autoencoder plus the derived latent box and collision oracle.
struct Artifacts {
  mesh::Mesh rest;
  std::unique_ptr<ae::Autoencoder> model;
  active::LatentBox box;
  std::unique_ptr<geom::CollisionOracle> oracle;
  std::unique_ptr<active::Labeler> labeler;
};

/// Trains the autoencoder on the collision-free poses in `dataDir` and writes
/// the checkpoint, training log, latent box and domain map into `aeDir`.
void train_ae(const ExperimentConfig& config, const std::string& dataDir, const std::string& aeDir);
Artifacts load_artifacts(const ExperimentConfig& config, const std::string& aeDir);

/// Uniform latent samples labelled by the oracle, cached under `aeDir/cache`.
std::vector<active::CollisionSample> labelled_uniform(const Artifacts& artifacts, const std::string& aeDir,
                                                      const std::string& tag, std::size_t n, std::uint64_t seed);

struct RunSummary {
  std::vector<std::size_t> datasetSizes;  // per checkpoint
  std::size_t finalSize = 0;
  bool partitionChecksPassed = true;
  std::size_t samplesChecked = 0;
};

/// Runs one method for one seed into `runDir` (config copy, per-iteration
/// detector checkpoints, dataset, training.csv, iterations.csv, manifest.json).
RunSummary run_method(const ExperimentConfig& config, const std::string& aeDir, Method method, std::uint64_t seed,
                      const std::string& runDir);

struct DetectionRow {
  int iteration = 0;
  std::size_t datasetSize = 0;
  active::DetectionMetrics metrics;
};

/// Accuracy and false negative rate of every checkpoint on the shared test set;
/// writes detection.csv.
std::vector<DetectionRow> eval_detection(const ExperimentConfig& config, const std::string& aeDir,
                                         const std::string& runDir);

struct HandlingRow {
  int iteration = 0;
  std::size_t datasetSize = 0;
  std::size_t trials = 0;
  double successRate = 0.0;
  double meanReduction = 0.0;
  double meanEmbeddingDifference = 0.0;
  double feasibleRate = 0.0;
  std::size_t bestEffortExits = 0;
  std::size_t bestEffortNonincreasing = 0;  // best-effort exits whose violation did not grow
};

/// ALM on shared penetrating codes for every checkpoint (or only the last when
/// `finalOnly`); writes handling.csv plus per-trial CSVs and JSON traces.
std::vector<HandlingRow> eval_handling(const ExperimentConfig& config, const std::string& aeDir,
                                       const std::string& runDir, bool finalOnly = false);

/// Piecewise-linear inverse of an accuracy-vs-size curve. Returns false when the
/// accuracy lies outside the curve's range.
bool equivalent_size(const std::vector<double>& sizes, const std::vector<double>& accuracies, double accuracy,
                     double& size);

/// Summary CSV (per method: final accuracy, FNR, success rate, equivalent
/// dataset size) and SVG curves of every metric against dataset size.
void report(const std::vector<std::string>& runDirs, const std::string& outDir);

/// Minimal line plot: one polyline per series.
struct Series {
  std::string name;
  std::vector<double> x, y;
};
std::string svg_plot(const std::string& title, const std::string& xLabel, const std::string& yLabel,
                     const std::vector<Series>& series);

}  // namespace ncd::exp
