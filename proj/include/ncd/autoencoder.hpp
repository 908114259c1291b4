// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ncd/geom.hpp"
#include "ncd/mesh.hpp"
#include "ncd/nn.hpp"

#include <string>
#include <vector>

namespace ncd::ae {

/// Bilevel latent code: z0 of length K and K level-2 codes of length L2.
/// The flat layout is [z0, z_1, ..., z_K].
struct LatentCode {
  Vector z0;
  std::vector<Vector> zSub;

  Vector flat() const;
  static LatentCode from_flat(const Vector& flat, int z0Size, int l2Size);
};

/// Row-stochastic vertex-to-domain soft assignment, |V| x K.
struct AttentionMap {
  Matrix weights;
};

/// Argmax per row; ties go to the lowest domain index.
geom::DomainMap domain_map(const AttentionMap& attention);

struct AutoencoderConfig {
  int z0Size = 8;
  int l2Size = 4;
  int width = 128;
  double sparsityWeight = 0.01;
  double learningRate = 0.01;
  double finalLearningRate = 1e-4;  // cosine decay target; equal to learningRate for a constant rate
  int batchSize = 128;
  int epochs = 300;
  std::uint64_t seed = 0;
};

class Autoencoder {
 public:
  Autoencoder(int vertexCount, const AutoencoderConfig& config);

  int vertex_count() const { return vertexCount_; }
  int feature_size() const { return 3 * vertexCount_; }
  int z0_size() const { return config_.z0Size; }
  int l2_size() const { return config_.l2Size; }
  int flat_size() const { return config_.z0Size * (1 + config_.l2Size); }
  const AutoencoderConfig& config() const { return config_; }

  /// Rows of `features` are feature vectors; returns one flat code per row.
  Matrix encode_batch(const Matrix& features) const;
  Matrix decode_batch(const Matrix& codes) const;
  LatentCode encode(const mesh::FeatureVector& f) const;
  mesh::FeatureVector decode(const Vector& flat) const;
  mesh::FeatureVector decode(const LatentCode& code) const { return decode(code.flat()); }
  /// Term i of the decoder sum (0 is the level-1 decoder, i >= 1 the masked
  /// level-2 decoders).
  mesh::FeatureVector decode_term(const Vector& flat, int i) const;

  /// Decoder on a tape with frozen weights: codes (n x flat) -> features (n x 3V).
  nn::Var decode(nn::Tape& tape, nn::Var codes) const;

  AttentionMap attention() const;
  double feature_scale() const { return scale_.value(0, 0); }
  void set_feature_scale(double s);

  std::vector<nn::Parameter*> trainable();
  std::vector<const nn::Parameter*> all_parameters() const;
  std::vector<nn::Parameter*> all_parameters();

  void save(const std::string& prefix) const;
  void load(const std::string& prefix);

  /// Training-mode forward on scaled features; returns (reconstruction, row entropy mean).
  std::pair<nn::Var, nn::Var> training_forward(nn::Tape& tape, nn::Var scaledFeatures);

 private:
  nn::Var run(nn::Tape& tape, nn::Mlp& net, nn::Var x, bool train);
  nn::Var attention_var(nn::Tape& tape, bool train);
  nn::Var mask(nn::Tape& tape, nn::Var attention, int i) const;
  nn::Var encode_impl(nn::Tape& tape, nn::Var x, nn::Var attention, bool train);
  nn::Var decode_impl(nn::Tape& tape, nn::Var codes, nn::Var attention, bool train);
  Autoencoder& self() const { return const_cast<Autoencoder&>(*this); }

  int vertexCount_;
  AutoencoderConfig config_;
  nn::Mlp encoder0_, decoder0_;
  std::vector<nn::Mlp> encoders_, decoders_;
  nn::Parameter logits_;
  nn::Parameter scale_;
};

struct TrainingLog {
  std::vector<double> loss;
  std::vector<double> reconstruction;
  std::vector<double> entropy;
  double initialReconstruction = 0.0;
};

/// Adam on MSE reconstruction of the scaled features plus
/// sparsityWeight * mean attention row entropy. `features` rows are training
/// feature vectors. Writes an epoch,loss,... CSV when csvPath is non-empty.
/// Throws kNumerical when the loss becomes non-finite.
TrainingLog train_autoencoder(Autoencoder& model, const Matrix& features, const std::string& csvPath = "");

/// Stacks feature_transform of every mesh as rows.
Matrix feature_matrix(const std::vector<mesh::Mesh>& meshes);

}  // namespace ncd::ae
