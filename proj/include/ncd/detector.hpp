// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ncd/nn.hpp"

#include <string>
#include <vector>

namespace ncd::det {

struct DetectorConfig {
  int z0Size = 8;
  int l2Size = 4;
  int cseWidth = 64;
  int stateSize = 16;  // |S_0|
  int cpWidth = 32;
  int classifierWidth = 32;
  double celuAlpha = 1.0;
  std::uint64_t seed = 0;
};

struct DetectorOutput {
  double prob = 0.5;
  double logit = 0.0;
  Vector s;  // S_1 .. S_K
};

/// CSE encodes the whole code into S_0, one CP network shared by every domain
/// maps (S_0, Z_i) to S_i, and MLP_c maps (S_1..S_K) to a logit squashed by a
/// sigmoid. Inputs are normalised by a fixed centre and half-width per axis.
class Detector {
 public:
  struct Graph {
    nn::Var logit;  // n x 1
    nn::Var prob;   // n x 1
    nn::Var s;      // n x K
  };

  explicit Detector(const DetectorConfig& config);

  const DetectorConfig& config() const { return config_; }
  int flat_size() const { return config_.z0Size * (1 + config_.l2Size); }

  void set_normalization(const Vector& centre, const Vector& halfWidth);
  Vector centre() const { return centre_.value.row(0).transpose(); }
  Vector half_width() const { return halfWidth_.value.row(0).transpose(); }

  /// Builds the detector on a tape. `train` selects trainable parameter leaves.
  Graph build(nn::Tape& tape, nn::Var codes, bool train);

  DetectorOutput forward(const Vector& z) const;
  /// Probabilities for each row of `codes`.
  Vector probabilities(const Matrix& codes) const;
  /// Gradient of prob with respect to z.
  Vector gradient(const Vector& z) const;
  /// prob and its gradient for each row; gradients returned row-wise.
  std::pair<Vector, Matrix> probabilities_and_gradients(const Matrix& codes) const;

  std::vector<nn::Parameter*> trainable();
  std::vector<const nn::Parameter*> parameters() const;
  std::size_t parameter_count() const;
  /// Zeroes the classifier's weights (its output becomes sigmoid(0)).
  void zero_classifier();

  void save(const std::string& prefix) const;
  void load(const std::string& prefix);

 private:
  Detector& self() const { return const_cast<Detector&>(*this); }

  DetectorConfig config_;
  nn::Mlp cse_, cp_, classifier_;
  nn::Parameter centre_, halfWidth_, inverseHalfWidth_;
};

}  // namespace ncd::det
