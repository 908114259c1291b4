// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ncd/common.hpp"

#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ncd::nn {

/// Learnable matrix with its accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

struct Var {
  int id = -1;
};

/// Reverse-mode tape over dense matrices. Rows are batch entries. Nodes are
/// appended in evaluation order, so reverse insertion order is a reverse
/// topological order and backward() visits each node once.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Leaf whose gradient is wanted (e.g. latent inputs).
  Var variable(Matrix value);
  /// Parameter leaf; its value is referenced, not copied, and backward() adds
  /// the adjoint into `p.grad`.
  Var parameter(Parameter& p);
  /// Frozen parameter leaf: referenced, no gradient.
  Var parameter(const Parameter& p);

  const Matrix& value(Var v) const;
  /// Adjoint after backward(); zero matrix when the node did not receive one.
  Matrix gradient(Var v) const;
  double scalar(Var v) const { return value(v)(0, 0); }
  std::size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b);
  Var affine(Var x, Var weight, Var bias);  // x W + 1 b
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var add_row(Var a, Var row);  // broadcast a 1 x n row over every row of a
  Var mul_row(Var a, Var row);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);

  Var tanh(Var a);
  Var sigmoid(Var a);
  Var celu(Var a, double alpha = 1.0);
  Var relu(Var a);
  Var abs(Var a);
  Var square(Var a);
  Var xlogx(Var a);  // x log x, 0 at x = 0
  Var softmax_rows(Var a);
  /// Elementwise softplus(x) - t x: binary cross entropy on logits.
  Var bce_with_logits(Var logits, const Matrix& targets);

  Var sum(Var a);        // 1 x 1
  Var mean(Var a);       // 1 x 1
  Var row_sums(Var a);   // n x 1
  Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
  Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
  Var concat_cols(std::span<const Var> parts);
  Var concat_rows(std::span<const Var> parts);
  Var transpose(Var a);
  Var repeat_cols_each(Var a, int times);  // column j becomes columns j*times .. j*times+times-1
  Var gather_rows(Var a, std::vector<int> rows);

  /// Back-propagates from a 1 x 1 node.
  void backward(Var output);

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    bool needsGrad = false;
    bool hasGrad = false;
    Parameter* param = nullptr;
    const char* op = "";
    std::function<void(Tape&, int)> back;

    const Matrix& val() const { return external ? *external : value; }
  };

  Var push(const char* op, Matrix value, std::initializer_list<Var> parents,
           std::function<void(Tape&, int)> back);
  Matrix& grad_of(int id);
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
};

enum class Activation { kIdentity, kTanh, kCelu, kSigmoid };

/// Fully connected layer: x W + b, W initialised uniform in
/// +-sqrt(6 / (fan_in + fan_out)), b zero.
class Dense {
 public:
  Dense(int in, int out, const std::string& name, std::mt19937_64& rng);

  Var apply(Tape& tape, Var x) const;  // frozen weights
  Var train(Tape& tape, Var x);        // weights receive gradients
  std::vector<Parameter*> parameters() { return {&weight_, &bias_}; }
  std::vector<const Parameter*> parameters() const { return {&weight_, &bias_}; }
  int in() const { return static_cast<int>(weight_.value.rows()); }
  int out() const { return static_cast<int>(weight_.value.cols()); }

 private:
  Parameter weight_;
  Parameter bias_;
};

Var activate(Tape& tape, Var x, Activation act, double celuAlpha = 1.0);

/// Stack of Dense layers; `hidden` applies after every layer but the last,
/// `output` after the last.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> widths, Activation hidden, Activation output, const std::string& name,
      std::mt19937_64& rng, double celuAlpha = 1.0);

  Var apply(Tape& tape, Var x) const;
  Var train(Tape& tape, Var x);
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;
  int in() const { return layers_.front().in(); }
  int out() const { return layers_.back().out(); }

 private:
  std::vector<Dense> layers_;
  Activation hidden_ = Activation::kTanh;
  Activation output_ = Activation::kIdentity;
  double celuAlpha_ = 1.0;
};

std::size_t count_parameters(std::span<Parameter* const> params);

struct AdamConfig {
  double learningRate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moments per parameter plus the step counter.
struct AdamState {
  AdamConfig config;
  std::vector<Matrix> firstMoment;
  std::vector<Matrix> secondMoment;
  long step = 0;

  AdamState() = default;
  AdamState(AdamConfig c, std::span<Parameter* const> params);
};

/// One Adam update using each parameter's accumulated grad. Throws
/// kDimensionMismatch when the state was built for differently shaped parameters.
void adam_step(AdamState& state, std::span<Parameter* const> params);

void zero_grads(std::span<Parameter* const> params);

/// Writes `<prefix>.bin` (flat float64 values in parameter order) and
/// `<prefix>.json` (name, rows, cols, offset per parameter).
void save_checkpoint(const std::string& prefix, std::span<const Parameter* const> params);
void load_checkpoint(const std::string& prefix, std::span<Parameter* const> params);

/// Central finite differences of a scalar function.
Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-5);

/// ||analytic - numeric|| / max(||analytic||, ||numeric||, floor).
double relative_error(const Vector& analytic, const Vector& numeric, double floor = 1e-12);

}  // namespace ncd::nn
