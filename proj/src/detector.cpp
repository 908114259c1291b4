// SPDX-License-Identifier: Apache-2.0
#include "ncd/detector.hpp"

#include <random>

namespace ncd::det {

using nn::Activation;
using nn::Tape;
using nn::Var;

Detector::Detector(const DetectorConfig& config) : config_(config) {
  if (config.z0Size <= 0 || config.l2Size <= 0 || config.cseWidth <= 0 || config.stateSize <= 0 ||
      config.cpWidth <= 0 || config.classifierWidth <= 0)
    throw Error(ErrorCode::kConfig, "detector widths must be positive");
  std::mt19937_64 rng(config.seed);
  const int flat = flat_size();
  cse_ = nn::Mlp({flat, config.cseWidth, config.cseWidth, config.stateSize}, Activation::kCelu, Activation::kTanh,
                 "CSE", rng, config.celuAlpha);
  cp_ = nn::Mlp({config.stateSize + config.l2Size, config.cpWidth, config.cpWidth, 1}, Activation::kCelu,
                Activation::kIdentity, "CP", rng, config.celuAlpha);
  classifier_ = nn::Mlp({config.z0Size, config.classifierWidth, config.classifierWidth, 1}, Activation::kTanh,
                        Activation::kIdentity, "MLPc", rng);
  centre_ = nn::Parameter("norm.centre", Matrix::Zero(1, flat));
  halfWidth_ = nn::Parameter("norm.half_width", Matrix::Ones(1, flat));
  inverseHalfWidth_ = nn::Parameter("norm.inverse_half_width", Matrix::Ones(1, flat));
}

void Detector::set_normalization(const Vector& centre, const Vector& halfWidth) {
  if (centre.size() != flat_size() || halfWidth.size() != flat_size())
    throw Error(ErrorCode::kDimensionMismatch, "detector normalisation has the wrong length");
  if ((halfWidth.array() < 0.0).any()) throw Error(ErrorCode::kInvalidArgument, "negative half width");
  centre_.value = centre.transpose();
  halfWidth_.value = halfWidth.transpose();
  inverseHalfWidth_.value = halfWidth.transpose().unaryExpr([](double h) { return 1.0 / std::max(h, 1e-9); });
}

Detector::Graph Detector::build(Tape& tape, Var codes, bool train) {
  const int k = config_.z0Size, l2 = config_.l2Size;
  if (tape.value(codes).cols() != flat_size())
    throw Error(ErrorCode::kDimensionMismatch, "detector: expected codes of length " + std::to_string(flat_size()) +
                                                   ", got " + std::to_string(tape.value(codes).cols()));
  const Eigen::Index n = tape.value(codes).rows();
  const nn::Parameter& centre = centre_;
  const nn::Parameter& inverse = inverseHalfWidth_;
  const Var x = tape.mul_row(tape.sub(codes, tape.constant(centre.value.replicate(n, 1))), tape.parameter(inverse));

  auto run = [&](nn::Mlp& net, Var in) { return train ? net.train(tape, in) : static_cast<const nn::Mlp&>(net).apply(tape, in); };

  const Var s0 = run(cse_, x);
  std::vector<Var> blocks;
  for (int i = 0; i < k; ++i) {
    const Var parts[2] = {s0, tape.slice_cols(x, k + i * l2, l2)};
    blocks.push_back(tape.concat_cols(parts));
  }
  const Var local = run(cp_, tape.concat_rows(blocks));
  std::vector<Var> columns;
  for (int i = 0; i < k; ++i) columns.push_back(tape.slice_rows(local, i * n, n));
  const Var s = tape.concat_cols(columns);
  const Var logit = run(classifier_, s);
  return {logit, tape.sigmoid(logit), s};
}

DetectorOutput Detector::forward(const Vector& z) const {
  Tape tape;
  const Graph g = self().build(tape, tape.constant(z.transpose()), false);
  return {tape.scalar(g.prob), tape.scalar(g.logit), tape.value(g.s).row(0).transpose()};
}

Vector Detector::probabilities(const Matrix& codes) const {
  Tape tape;
  return tape.value(self().build(tape, tape.constant(codes), false).prob).col(0);
}

std::pair<Vector, Matrix> Detector::probabilities_and_gradients(const Matrix& codes) const {
  Tape tape;
  const Var z = tape.variable(codes);
  const Graph g = self().build(tape, z, false);
  tape.backward(tape.sum(g.prob));
  return {tape.value(g.prob).col(0), tape.gradient(z)};
}

Vector Detector::gradient(const Vector& z) const {
  return probabilities_and_gradients(z.transpose()).second.row(0).transpose();
}

std::vector<nn::Parameter*> Detector::trainable() {
  std::vector<nn::Parameter*> out = cse_.parameters();
  for (nn::Parameter* p : cp_.parameters()) out.push_back(p);
  for (nn::Parameter* p : classifier_.parameters()) out.push_back(p);
  return out;
}

std::vector<const nn::Parameter*> Detector::parameters() const {
  const auto params = self().trainable();
  return {params.begin(), params.end()};
}

std::size_t Detector::parameter_count() const {
  return cse_.parameter_count() + cp_.parameter_count() + classifier_.parameter_count();
}

void Detector::zero_classifier() {
  for (nn::Parameter* p : classifier_.parameters()) p->value.setZero();
}

void Detector::save(const std::string& prefix) const {
  std::vector<const nn::Parameter*> params = parameters();
  params.insert(params.end(), {&centre_, &halfWidth_, &inverseHalfWidth_});
  nn::save_checkpoint(prefix, params);
}

void Detector::load(const std::string& prefix) {
  std::vector<nn::Parameter*> params = trainable();
  params.insert(params.end(), {&centre_, &halfWidth_, &inverseHalfWidth_});
  nn::load_checkpoint(prefix, params);
}

}  // namespace ncd::det
