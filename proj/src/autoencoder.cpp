// SPDX-License-Identifier: Apache-2.0
#include "ncd/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <random>

namespace ncd::ae {

using nn::Activation;
using nn::Tape;
using nn::Var;

Vector LatentCode::flat() const {
  const Eigen::Index l2 = zSub.empty() ? 0 : zSub.front().size();
  Vector out(z0.size() + static_cast<Eigen::Index>(zSub.size()) * l2);
  out.head(z0.size()) = z0;
  for (std::size_t i = 0; i < zSub.size(); ++i) {
    if (zSub[i].size() != l2) throw Error(ErrorCode::kDimensionMismatch, "level-2 codes differ in length");
    out.segment(z0.size() + static_cast<Eigen::Index>(i) * l2, l2) = zSub[i];
  }
  return out;
}

LatentCode LatentCode::from_flat(const Vector& flat, int z0Size, int l2Size) {
  if (z0Size <= 0 || l2Size < 0 || flat.size() != z0Size * (1 + l2Size))
    throw Error(ErrorCode::kDimensionMismatch, "latent code length " + std::to_string(flat.size()) +
                                                   " does not match |Z0|=" + std::to_string(z0Size) +
                                                   ", L2=" + std::to_string(l2Size));
  LatentCode code;
  code.z0 = flat.head(z0Size);
  for (int i = 0; i < z0Size; ++i) code.zSub.push_back(flat.segment(z0Size + i * l2Size, l2Size));
  return code;
}

geom::DomainMap domain_map(const AttentionMap& attention) {
  geom::DomainMap map;
  map.count = static_cast<int>(attention.weights.cols());
  map.domainOf.resize(static_cast<std::size_t>(attention.weights.rows()));
  for (Eigen::Index v = 0; v < attention.weights.rows(); ++v) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < attention.weights.cols(); ++k)
      if (attention.weights(v, k) > attention.weights(v, best)) best = k;
    map.domainOf[static_cast<std::size_t>(v)] = static_cast<int>(best);
  }
  return map;
}

Autoencoder::Autoencoder(int vertexCount, const AutoencoderConfig& config)
    : vertexCount_(vertexCount), config_(config) {
  if (vertexCount <= 0 || config.z0Size <= 0 || config.l2Size <= 0 || config.width <= 0)
    throw Error(ErrorCode::kConfig, "autoencoder sizes must be positive");
  std::mt19937_64 rng(config.seed);
  const int f = feature_size(), w = config.width, k = config.z0Size, l2 = config.l2Size;
  encoder0_ = nn::Mlp({f, w, w, k}, Activation::kTanh, Activation::kIdentity, "E0", rng);
  decoder0_ = nn::Mlp({k, w, w, f}, Activation::kTanh, Activation::kIdentity, "D0", rng);
  for (int i = 1; i <= k; ++i) {
    encoders_.emplace_back(std::vector<int>{f, w, w, l2}, Activation::kTanh, Activation::kIdentity,
                           "E" + std::to_string(i), rng);
    decoders_.emplace_back(std::vector<int>{l2 + 1, w, w, f}, Activation::kTanh, Activation::kIdentity,
                           "D" + std::to_string(i), rng);
  }
  std::uniform_real_distribution<double> init(-1.0, 1.0);
  Matrix logits(vertexCount, k);
  for (Eigen::Index c = 0; c < logits.cols(); ++c)
    for (Eigen::Index r = 0; r < logits.rows(); ++r) logits(r, c) = init(rng);
  logits_ = nn::Parameter("attention", std::move(logits));
  scale_ = nn::Parameter("feature_scale", Matrix::Ones(1, 1));
}

void Autoencoder::set_feature_scale(double s) {
  if (!(s > 0.0) || !std::isfinite(s)) throw Error(ErrorCode::kInvalidArgument, "feature scale must be positive");
  scale_.value(0, 0) = s;
}

Var Autoencoder::run(Tape& tape, nn::Mlp& net, Var x, bool train) {
  return train ? net.train(tape, x) : static_cast<const nn::Mlp&>(net).apply(tape, x);
}

Var Autoencoder::attention_var(Tape& tape, bool train) {
  return tape.softmax_rows(train ? tape.parameter(logits_) : tape.parameter(static_cast<const nn::Parameter&>(logits_)));
}

Var Autoencoder::mask(Tape& tape, Var attention, int i) const {
  return tape.repeat_cols_each(tape.transpose(tape.slice_cols(attention, i, 1)), 3);
}

Var Autoencoder::encode_impl(Tape& tape, Var x, Var attention, bool train) {
  const int k = config_.z0Size;
  std::vector<Var> parts;
  const Var z0 = run(tape, encoder0_, x, train);
  parts.push_back(z0);
  const Var residual = tape.sub(x, run(tape, decoder0_, z0, train));
  for (int i = 0; i < k; ++i)
    parts.push_back(run(tape, encoders_[static_cast<std::size_t>(i)], tape.mul_row(residual, mask(tape, attention, i)), train));
  return tape.concat_cols(parts);
}

Var Autoencoder::decode_impl(Tape& tape, Var codes, Var attention, bool train) {
  const int k = config_.z0Size, l2 = config_.l2Size;
  if (tape.value(codes).cols() != flat_size())
    throw Error(ErrorCode::kDimensionMismatch, "decode: expected codes of length " + std::to_string(flat_size()) +
                                                   ", got " + std::to_string(tape.value(codes).cols()));
  const Var z0 = tape.slice_cols(codes, 0, k);
  Var out = run(tape, decoder0_, z0, train);
  for (int i = 0; i < k; ++i) {
    const Var in[2] = {tape.slice_cols(codes, k + i * l2, l2), tape.slice_cols(z0, i, 1)};
    const Var term = run(tape, decoders_[static_cast<std::size_t>(i)], tape.concat_cols(in), train);
    out = tape.add(out, tape.mul_row(term, mask(tape, attention, i)));
  }
  return out;
}

Matrix Autoencoder::encode_batch(const Matrix& features) const {
  if (features.cols() != feature_size())
    throw Error(ErrorCode::kDimensionMismatch, "encode: expected " + std::to_string(feature_size()) +
                                                   " features, got " + std::to_string(features.cols()));
  Tape tape;
  const Var x = tape.constant(features / feature_scale());
  return tape.value(self().encode_impl(tape, x, self().attention_var(tape, false), false));
}

Matrix Autoencoder::decode_batch(const Matrix& codes) const {
  Tape tape;
  return tape.value(decode(tape, tape.constant(codes)));
}

Var Autoencoder::decode(Tape& tape, Var codes) const {
  return tape.scale(self().decode_impl(tape, codes, self().attention_var(tape, false), false), feature_scale());
}

LatentCode Autoencoder::encode(const mesh::FeatureVector& f) const {
  const Vector flat = encode_batch(f.values.transpose()).row(0).transpose();
  return LatentCode::from_flat(flat, config_.z0Size, config_.l2Size);
}

mesh::FeatureVector Autoencoder::decode(const Vector& flat) const {
  if (flat.size() != flat_size())
    throw Error(ErrorCode::kDimensionMismatch, "decode: expected code length " + std::to_string(flat_size()));
  return {decode_batch(flat.transpose()).row(0).transpose()};
}

mesh::FeatureVector Autoencoder::decode_term(const Vector& flat, int i) const {
  const int k = config_.z0Size, l2 = config_.l2Size;
  if (flat.size() != flat_size()) throw Error(ErrorCode::kDimensionMismatch, "decode_term: bad code length");
  if (i < 0 || i > k) throw Error(ErrorCode::kInvalidArgument, "decode_term: term index out of range");
  Tape tape;
  const Var codes = tape.constant(flat.transpose());
  const Var z0 = tape.slice_cols(codes, 0, k);
  Var out;
  if (i == 0) {
    out = decoder0_.apply(tape, z0);
  } else {
    const Var in[2] = {tape.slice_cols(codes, k + (i - 1) * l2, l2), tape.slice_cols(z0, i - 1, 1)};
    out = tape.mul_row(decoders_[static_cast<std::size_t>(i - 1)].apply(tape, tape.concat_cols(in)),
                       mask(tape, self().attention_var(tape, false), i - 1));
  }
  return {tape.value(tape.scale(out, feature_scale())).row(0).transpose()};
}

AttentionMap Autoencoder::attention() const {
  Tape tape;
  return {tape.value(self().attention_var(tape, false))};
}

std::pair<Var, Var> Autoencoder::training_forward(Tape& tape, Var scaledFeatures) {
  const Var attention = attention_var(tape, true);
  const Var codes = encode_impl(tape, scaledFeatures, attention, true);
  const Var recon = decode_impl(tape, codes, attention, true);
  const Var entropy = tape.scale(tape.sum(tape.xlogx(attention)), -1.0 / vertexCount_);
  return {recon, entropy};
}

std::vector<nn::Parameter*> Autoencoder::trainable() {
  std::vector<nn::Parameter*> out = encoder0_.parameters();
  for (nn::Parameter* p : decoder0_.parameters()) out.push_back(p);
  for (auto& e : encoders_)
    for (nn::Parameter* p : e.parameters()) out.push_back(p);
  for (auto& d : decoders_)
    for (nn::Parameter* p : d.parameters()) out.push_back(p);
  out.push_back(&logits_);
  return out;
}

std::vector<nn::Parameter*> Autoencoder::all_parameters() {
  std::vector<nn::Parameter*> out = trainable();
  out.push_back(&scale_);
  return out;
}

std::vector<const nn::Parameter*> Autoencoder::all_parameters() const {
  const auto params = self().all_parameters();
  return {params.begin(), params.end()};
}

void Autoencoder::save(const std::string& prefix) const {
  const auto params = all_parameters();
  nn::save_checkpoint(prefix, params);
}

void Autoencoder::load(const std::string& prefix) {
  const auto params = all_parameters();
  nn::load_checkpoint(prefix, params);
}

Matrix feature_matrix(const std::vector<mesh::Mesh>& meshes) {
  if (meshes.empty()) return Matrix(0, 0);
  Matrix out(static_cast<Eigen::Index>(meshes.size()), 3 * static_cast<Eigen::Index>(meshes.front().vertex_count()));
  parallel_for(meshes.size(), [&](std::size_t i) {
    const mesh::FeatureVector f = mesh::feature_transform(meshes[i]);
    if (f.values.size() != out.cols())
      throw Error(ErrorCode::kDimensionMismatch, "training meshes do not share a topology");
    out.row(static_cast<Eigen::Index>(i)) = f.values.transpose();
  });
  return out;
}

namespace {

double reconstruction_mse(const Autoencoder& model, const Matrix& scaled) {
  Tape tape;
  auto& m = const_cast<Autoencoder&>(model);
  const Matrix recon = tape.value(m.decode(tape, tape.constant(m.encode_batch(scaled * model.feature_scale())))) /
                       model.feature_scale();
  return (recon - scaled).squaredNorm() / static_cast<double>(scaled.size());
}

}  // namespace

TrainingLog train_autoencoder(Autoencoder& model, const Matrix& features, const std::string& csvPath) {
  const AutoencoderConfig& c = model.config();
  if (features.rows() < 2) throw Error(ErrorCode::kInvalidArgument, "autoencoder training needs at least 2 meshes");
  if (features.cols() != model.feature_size())
    throw Error(ErrorCode::kDimensionMismatch, "training features do not match the model's vertex count");
  if (c.epochs < 0 || c.batchSize <= 0) throw Error(ErrorCode::kConfig, "autoencoder epochs/batch size out of range");

  const double mean = features.mean();
  const double sd = std::sqrt((features.array() - mean).square().mean());
  model.set_feature_scale(sd > 1e-12 ? sd : 1.0);
  const Matrix scaled = features / model.feature_scale();

  TrainingLog log;
  log.initialReconstruction = reconstruction_mse(model, scaled);

  std::ofstream csv;
  if (!csvPath.empty()) {
    csv.open(csvPath);
    if (!csv) throw Error(ErrorCode::kIo, "cannot write " + csvPath);
    csv << "epoch,loss,reconstruction,entropy\n" << std::setprecision(10);
  }

  const auto params = model.trainable();
  nn::AdamState adam({c.learningRate, 0.9, 0.999, 1e-8}, params);
  std::mt19937_64 rng(c.seed ^ 0x5eedULL);
  std::vector<int> order(static_cast<std::size_t>(features.rows()));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < c.epochs; ++epoch) {
    const double progress = c.epochs > 1 ? static_cast<double>(epoch) / (c.epochs - 1) : 0.0;
    adam.config.learningRate =
        c.finalLearningRate + 0.5 * (c.learningRate - c.finalLearningRate) * (1.0 + std::cos(std::numbers::pi * progress));
    std::shuffle(order.begin(), order.end(), rng);
    double lossSum = 0.0, reconSum = 0.0, entropySum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(c.batchSize)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(c.batchSize));
      Matrix batch(static_cast<Eigen::Index>(end - start), scaled.cols());
      for (std::size_t i = start; i < end; ++i) batch.row(static_cast<Eigen::Index>(i - start)) = scaled.row(order[i]);

      Tape tape;
      const Var x = tape.constant(std::move(batch));
      const auto [recon, entropy] = model.training_forward(tape, x);
      const Var mse = tape.mean(tape.square(tape.sub(recon, x)));
      const Var loss = tape.add(mse, tape.scale(entropy, c.sparsityWeight));
      if (!std::isfinite(tape.scalar(loss)))
        throw Error(ErrorCode::kNumerical, "autoencoder loss diverged at epoch " + std::to_string(epoch));
      nn::zero_grads(params);
      tape.backward(loss);
      nn::adam_step(adam, params);
      lossSum += tape.scalar(loss);
      reconSum += tape.scalar(mse);
      entropySum += tape.scalar(entropy);
      ++batches;
    }
    log.loss.push_back(lossSum / batches);
    log.reconstruction.push_back(reconSum / batches);
    log.entropy.push_back(entropySum / batches);
    if (csv.is_open())
      csv << epoch << ',' << log.loss.back() << ',' << log.reconstruction.back() << ',' << log.entropy.back() << '\n';
  }
  return log;
}

}  // namespace ncd::ae
