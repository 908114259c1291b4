// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ncd/autoencoder.hpp"
#include "ncd/detector.hpp"
#include "ncd/geom.hpp"

#include <random>
#include <string>
#include <vector>

namespace ncd::active {

/// Axis-aligned box in latent space.
struct LatentBox {
  Vector lo;
  Vector hi;

  Eigen::Index dim() const { return lo.size(); }
  Vector centre() const { return 0.5 * (lo + hi); }
  Vector half_width() const { return 0.5 * (hi - lo); }
  bool contains(const Vector& z, double tol = 0.0) const;
  Vector clamp(const Vector& z) const;
};

/// Componentwise min/max of the rows of `codes`.
LatentBox latent_box(const Matrix& codes);

/// n rows, each coordinate uniform in its interval.
Matrix sample_uniform(const LatentBox& box, std::size_t n, std::uint64_t seed);

/// One labelled latent code.
struct CollisionSample {
  Vector z;
  double pd = 0.0;
  Vector pdPerDomain;
  int label = 0;
};

enum class Subset { kPositive, kNegative, kBoundary };
const char* to_string(Subset s);

/// Positive iff pd > eps, negative iff pd < 0, boundary iff 0 <= pd <= eps.
Subset partition(double pd, double eps);

/// Decodes codes to meshes and labels them with the collision oracle.
class Labeler {
 public:
  Labeler(const ae::Autoencoder& decoder, const geom::CollisionOracle& oracle) : decoder_(decoder), oracle_(oracle) {}

  CollisionSample label(const Vector& z) const;
  /// Rows of `codes`; labelled in parallel, results ordered by row.
  std::vector<CollisionSample> label_batch(const Matrix& codes) const;
  mesh::Mesh decode_mesh(const Vector& z) const;
  const geom::CollisionOracle& oracle() const { return oracle_; }

 private:
  const ae::Autoencoder& decoder_;
  const geom::CollisionOracle& oracle_;
};

struct SubsetCounts {
  std::size_t positive = 0, negative = 0, boundary = 0;
  std::size_t total() const { return positive + negative + boundary; }
};

/// Append-only labelled dataset D_c.
class CollisionDataset {
 public:
  explicit CollisionDataset(double eps = 1e-4);

  double eps() const { return eps_; }
  const std::vector<CollisionSample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  void append(const std::vector<CollisionSample>& batch);
  SubsetCounts counts() const;
  std::vector<std::size_t> indices(Subset s) const;

  /// `<prefix>.bin` holds the samples, `<prefix>.json` the counts and metadata.
  void save(const std::string& prefix, const std::string& metadataJson = "{}") const;
  static CollisionDataset load(const std::string& prefix);

 private:
  double eps_;
  std::vector<CollisionSample> samples_;
};

struct ProjectionConfig {
  double epsZ = 1e-7;
  int maxIter = 100;
  int maxBacktrack = 10;
};

struct ProjectionResult {
  Vector z;
  double prob = 0.5;
  int iterations = 0;
  bool converged = false;
  bool abandoned = false;  // non-finite value met
};

/// Damped Gauss-Newton iteration on r(z) = prob(z) - 0.5 with
/// H = g g^T + lambda I, lambda = 1e-6 (1 + |g|^2), solved in closed form. Steps
/// are halved until |r| decreases; iterates stay inside the box.
ProjectionResult project_to_boundary(const det::Detector& detector, const Vector& z, const LatentBox& box,
                                     const ProjectionConfig& config = {});

std::vector<CollisionSample> bootstrap(std::size_t nInit, const LatentBox& box, const Labeler& labeler,
                                       std::uint64_t seed);

struct AggregateResult {
  std::vector<CollisionSample> samples;  // projected half first, then the uniform half
  std::vector<ProjectionResult> projections;
  std::size_t projectedCount = 0;
};

/// N_aug/2 codes drawn from the dataset with replacement and projected onto the
/// detector's 0.5 level set, plus N_aug - N_aug/2 fresh uniform codes; all labelled.
AggregateResult aggregate(const CollisionDataset& dataset, const det::Detector& detector, const LatentBox& box,
                          const Labeler& labeler, std::size_t nAug, std::uint64_t seed,
                          const ProjectionConfig& config = {});

struct LossWeights {
  double pd = 5.0;
  double pdSum = 0.2;
  double rank = 2.0;
  double ce = 2.0;
  double boundary = 0.5;
};

struct UpdateOptions {
  LossWeights weights;
  double eps = 1e-4;
  double alpha = 0.0;           // ranking margin in PD units
  bool boundarySet = true;      // false: every sample goes into the cross entropy with label pd > 0
  std::size_t rankPairs = 4096;  // per minibatch
};

struct TrainSchedule {
  double learningRate = 1e-3;
  int batchSize = 512;
  int epochs = 100;
};

struct LossTerms {
  nn::Var total;
  double pd = 0.0, rank = 0.0, ce = 0.0, boundary = 0.0;
};

/// Mean of |prob - 0.5| over the rows of `probs`.
nn::Var boundary_loss(nn::Tape& tape, nn::Var probs);

/// Loss on one minibatch whose rows match `batch`.
LossTerms detector_loss(nn::Tape& tape, const det::Detector::Graph& graph,
                        const std::vector<const CollisionSample*>& batch, const UpdateOptions& options,
                        std::mt19937_64& rng);

struct EpochLog {
  int epoch = 0;
  double total = 0.0, pd = 0.0, rank = 0.0, ce = 0.0, boundary = 0.0;
  double validationAccuracy = 0.0;
};

/// Adam epochs over `train`, warm-starting from the detector's current weights.
/// Throws kNumerical on a non-finite loss.
std::vector<EpochLog> model_update(det::Detector& detector, const std::vector<CollisionSample>& train,
                                   const std::vector<CollisionSample>& validation, const UpdateOptions& options,
                                   const TrainSchedule& schedule, std::uint64_t seed);

/// Ranking margin: scale * mean |pd| over the samples.
double ranking_margin(const std::vector<CollisionSample>& samples, double scale = 0.05);

struct ElbowResult {
  double x = 0.0;
  std::size_t index = 0;
  bool found = false;
};

/// Kneedle: after min-max normalisation, the knee maximises y - x. Returns the
/// last point with found == false when the difference curve never exceeds 0.
ElbowResult elbow_point(const std::vector<double>& xs, const std::vector<double>& ys);

/// Fraction of samples predicted correctly and fraction of positives predicted negative.
struct DetectionMetrics {
  double accuracy = 0.0;
  double falseNegativeRate = 0.0;
  std::size_t positives = 0;
  std::size_t count = 0;
};
DetectionMetrics detection_metrics(const Vector& probs, const std::vector<int>& labels);

}  // namespace ncd::active
