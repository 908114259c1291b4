// SPDX-License-Identifier: Apache-2.0
#include "ncd/nn.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace ncd::nn {

Dense::Dense(int in, int out, const std::string& name, std::mt19937_64& rng) {
  if (in <= 0 || out <= 0) throw Error(ErrorCode::kInvalidArgument, "dense layer needs positive widths");
  const double limit = std::sqrt(6.0 / (in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix w(in, out);
  for (Eigen::Index c = 0; c < w.cols(); ++c)
    for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = dist(rng);
  weight_ = Parameter(name + ".W", std::move(w));
  bias_ = Parameter(name + ".b", Matrix::Zero(1, out));
}

Var Dense::apply(Tape& tape, Var x) const {
  const Parameter& w = weight_;
  const Parameter& b = bias_;
  return tape.affine(x, tape.parameter(w), tape.parameter(b));
}

Var Dense::train(Tape& tape, Var x) { return tape.affine(x, tape.parameter(weight_), tape.parameter(bias_)); }

Var activate(Tape& tape, Var x, Activation act, double celuAlpha) {
  switch (act) {
    case Activation::kIdentity: return x;
    case Activation::kTanh: return tape.tanh(x);
    case Activation::kCelu: return tape.celu(x, celuAlpha);
    case Activation::kSigmoid: return tape.sigmoid(x);
  }
  return x;
}

Mlp::Mlp(std::vector<int> widths, Activation hidden, Activation output, const std::string& name,
         std::mt19937_64& rng, double celuAlpha)
    : hidden_(hidden), output_(output), celuAlpha_(celuAlpha) {
  if (widths.size() < 2) throw Error(ErrorCode::kInvalidArgument, "mlp needs at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    layers_.emplace_back(widths[i], widths[i + 1], name + "." + std::to_string(i), rng);
}

Var Mlp::apply(Tape& tape, Var x) const {
  for (std::size_t i = 0; i < layers_.size(); ++i)
    x = activate(tape, layers_[i].apply(tape, x), i + 1 < layers_.size() ? hidden_ : output_, celuAlpha_);
  return x;
}

Var Mlp::train(Tape& tape, Var x) {
  for (std::size_t i = 0; i < layers_.size(); ++i)
    x = activate(tape, layers_[i].train(tape, x), i + 1 < layers_.size() ? hidden_ : output_, celuAlpha_);
  return x;
}

std::vector<Parameter*> Mlp::parameters() {
  std::vector<Parameter*> out;
  for (Dense& l : layers_)
    for (Parameter* p : l.parameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> Mlp::parameters() const {
  std::vector<const Parameter*> out;
  for (const Dense& l : layers_)
    for (const Parameter* p : l.parameters()) out.push_back(p);
  return out;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter* p : parameters()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

std::size_t count_parameters(std::span<Parameter* const> params) {
  std::size_t n = 0;
  for (const Parameter* p : params) n += static_cast<std::size_t>(p->value.size());
  return n;
}

AdamState::AdamState(AdamConfig c, std::span<Parameter* const> params) : config(c) {
  for (const Parameter* p : params) {
    firstMoment.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    secondMoment.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void adam_step(AdamState& state, std::span<Parameter* const> params) {
  if (params.size() != state.firstMoment.size())
    throw Error(ErrorCode::kDimensionMismatch, "adam: parameter list does not match optimizer state");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = *params[i];
    if (p.value.rows() != state.firstMoment[i].rows() || p.value.cols() != state.firstMoment[i].cols() ||
        p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())
      throw Error(ErrorCode::kDimensionMismatch, "adam: shape mismatch for parameter '" + p.name + "'");
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(c.beta1, t);
  const double c2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Matrix& m = state.firstMoment[i];
    Matrix& v = state.secondMoment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * p.grad;
    v = c.beta2 * v + (1.0 - c.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= c.learningRate * (m.array() / c1) / ((v.array() / c2).sqrt() + c.epsilon);
  }
}

void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

void save_checkpoint(const std::string& prefix, std::span<const Parameter* const> params) {
  nlohmann::json manifest = nlohmann::json::array();
  std::ofstream bin(prefix + ".bin", std::ios::binary);
  if (!bin) throw Error(ErrorCode::kIo, "cannot write " + prefix + ".bin");
  std::size_t offset = 0;
  for (const Parameter* p : params) {
    // Column-major, as Eigen stores it.
    bin.write(reinterpret_cast<const char*>(p->value.data()), static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    manifest.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}, {"offset", offset}});
    offset += static_cast<std::size_t>(p->value.size());
  }
  if (!bin) throw Error(ErrorCode::kIo, "failed writing " + prefix + ".bin");
  std::ofstream js(prefix + ".json");
  js << nlohmann::json{{"count", offset}, {"parameters", manifest}}.dump(2) << '\n';
  if (!js) throw Error(ErrorCode::kIo, "cannot write " + prefix + ".json");
}

void load_checkpoint(const std::string& prefix, std::span<Parameter* const> params) {
  std::ifstream js(prefix + ".json");
  if (!js) throw Error(ErrorCode::kIo, "cannot read " + prefix + ".json");
  nlohmann::json manifest;
  try {
    js >> manifest;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad checkpoint manifest: ") + e.what());
  }
  const auto& entries = manifest.at("parameters");
  if (entries.size() != params.size())
    throw Error(ErrorCode::kDimensionMismatch, "checkpoint has " + std::to_string(entries.size()) +
                                                   " parameters, model has " + std::to_string(params.size()));
  std::ifstream bin(prefix + ".bin", std::ios::binary);
  if (!bin) throw Error(ErrorCode::kIo, "cannot read " + prefix + ".bin");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    const auto& e = entries[i];
    if (e.at("name").get<std::string>() != p.name || e.at("rows").get<Eigen::Index>() != p.value.rows() ||
        e.at("cols").get<Eigen::Index>() != p.value.cols())
      throw Error(ErrorCode::kDimensionMismatch, "checkpoint entry '" + e.at("name").get<std::string>() +
                                                     "' does not match parameter '" + p.name + "'");
    bin.seekg(static_cast<std::streamoff>(e.at("offset").get<std::size_t>() * sizeof(double)));
    bin.read(reinterpret_cast<char*>(p.value.data()), static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    if (!bin) throw Error(ErrorCode::kIo, "truncated checkpoint " + prefix + ".bin");
    p.zero_grad();
  }
}

Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double relative_error(const Vector& analytic, const Vector& numeric, double floor) {
  const double denom = std::max({analytic.norm(), numeric.norm(), floor});
  return (analytic - numeric).norm() / denom;
}

}  // namespace ncd::nn
