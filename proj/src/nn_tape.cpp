// SPDX-License-Identifier: Apache-2.0
#include "ncd/nn.hpp"

#include <cmath>

namespace ncd::nn {

namespace {

void check_finite(const Matrix& m, const char* op, std::size_t id) {
  if (!m.allFinite())
    throw Error(ErrorCode::kNumerical,
                std::string("non-finite value produced by '") + op + "' (tape node " + std::to_string(id) + ")");
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorCode::kDimensionMismatch, std::string(op) + ": operand shapes differ");
}

}  // namespace

const Tape::Node& Tape::node(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
    throw Error(ErrorCode::kInvalidArgument, "tape variable does not belong to this tape");
  return nodes_[static_cast<std::size_t>(v.id)];
}

const Matrix& Tape::value(Var v) const { return node(v).val(); }

Matrix Tape::gradient(Var v) const {
  const Node& n = node(v);
  if (n.hasGrad) return n.grad;
  return Matrix::Zero(n.val().rows(), n.val().cols());
}

Matrix& Tape::grad_of(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.hasGrad) {
    n.grad.setZero(n.val().rows(), n.val().cols());
    n.hasGrad = true;
  }
  return n.grad;
}

Var Tape::push(const char* op, Matrix value, std::initializer_list<Var> parents,
               std::function<void(Tape&, int)> back) {
  check_finite(value, op, nodes_.size());
  Node n;
  n.value = std::move(value);
  n.op = op;
  for (Var p : parents) n.needsGrad = n.needsGrad || node(p).needsGrad;
  if (n.needsGrad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Matrix value) { return push("constant", std::move(value), {}, nullptr); }

Var Tape::variable(Matrix value) {
  Var v = push("variable", std::move(value), {}, nullptr);
  nodes_.back().needsGrad = true;
  return v;
}

Var Tape::parameter(Parameter& p) {
  Node n;
  n.external = &p.value;
  n.param = &p;
  n.needsGrad = true;
  n.op = "parameter";
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1};
}

Var Tape::parameter(const Parameter& p) {
  Node n;
  n.external = &p.value;
  n.op = "parameter";
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1};
}

#define NCD_VAL(id) tape.nodes_[static_cast<std::size_t>(id)].val()
#define NCD_NEEDS(id) tape.nodes_[static_cast<std::size_t>(id)].needsGrad
#define NCD_GRAD(id) tape.nodes_[static_cast<std::size_t>(id)].grad

Var Tape::matmul(Var a, Var b) {
  if (value(a).cols() != value(b).rows()) throw Error(ErrorCode::kDimensionMismatch, "matmul: inner dimensions differ");
  return push("matmul", value(a) * value(b), {a, b}, [a, b](Tape& tape, int self) {
    const Matrix& g = NCD_GRAD(self);
    if (NCD_NEEDS(a.id)) tape.grad_of(a.id).noalias() += g * NCD_VAL(b.id).transpose();
    if (NCD_NEEDS(b.id)) tape.grad_of(b.id).noalias() += NCD_VAL(a.id).transpose() * g;
  });
}

Var Tape::affine(Var x, Var weight, Var bias) {
  const Matrix& xv = value(x);
  const Matrix& w = value(weight);
  const Matrix& bv = value(bias);
  if (xv.cols() != w.rows() || bv.rows() != 1 || bv.cols() != w.cols())
    throw Error(ErrorCode::kDimensionMismatch, "affine: expected x (n x " + std::to_string(w.rows()) +
                                                   "), got " + std::to_string(xv.cols()) + " columns");
  Matrix y = xv * w;
  y.rowwise() += bv.row(0);
  return push("affine", std::move(y), {x, weight, bias}, [x, weight, bias](Tape& tape, int self) {
    const Matrix& g = NCD_GRAD(self);
    if (NCD_NEEDS(x.id)) tape.grad_of(x.id).noalias() += g * NCD_VAL(weight.id).transpose();
    if (NCD_NEEDS(weight.id)) tape.grad_of(weight.id).noalias() += NCD_VAL(x.id).transpose() * g;
    if (NCD_NEEDS(bias.id)) tape.grad_of(bias.id) += g.colwise().sum();
  });
}

Var Tape::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  return push("add", value(a) + value(b), {a, b}, [a, b](Tape& tape, int self) {
    if (NCD_NEEDS(a.id)) tape.grad_of(a.id) += NCD_GRAD(self);
    if (NCD_NEEDS(b.id)) tape.grad_of(b.id) += NCD_GRAD(self);
  });
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "sub");
  return push("sub", value(a) - value(b), {a, b}, [a, b](Tape& tape, int self) {
    if (NCD_NEEDS(a.id)) tape.grad_of(a.id) += NCD_GRAD(self);
    if (NCD_NEEDS(b.id)) tape.grad_of(b.id) -= NCD_GRAD(self);
  });
}

Var Tape::mul(Var a, Var b) {
  require_same_shape(value(a), value(b), "mul");
  return push("mul", value(a).cwiseProduct(value(b)), {a, b}, [a, b](Tape& tape, int self) {
    const Matrix& g = NCD_GRAD(self);
    if (NCD_NEEDS(a.id)) tape.grad_of(a.id) += g.cwiseProduct(NCD_VAL(b.id));
    if (NCD_NEEDS(b.id)) tape.grad_of(b.id) += g.cwiseProduct(NCD_VAL(a.id));
  });
}

Var Tape::add_row(Var a, Var row) {
  if (value(row).rows() != 1 || value(row).cols() != value(a).cols())
    throw Error(ErrorCode::kDimensionMismatch, "add_row: row width differs");
  Matrix y = value(a);
  y.rowwise() += value(row).row(0);
  return push("add_row", std::move(y), {a, row}, [a, row](Tape& tape, int self) {
    if (NCD_NEEDS(a.id)) tape.grad_of(a.id) += NCD_GRAD(self);
    if (NCD_NEEDS(row.id)) tape.grad_of(row.id) += NCD_GRAD(self).colwise().sum();
  });
}

Var Tape::mul_row(Var a, Var row) {
  if (value(row).rows() != 1 || value(row).cols() != value(a).cols())
    throw Error(ErrorCode::kDimensionMismatch, "mul_row: row width differs");
  Matrix y = value(a).array().rowwise() * value(row).row(0).array();
  return push("mul_row", std::move(y), {a, row}, [a, row](Tape& tape, int self) {
    const Matrix& g = NCD_GRAD(self);
    if (NCD_NEEDS(a.id)) tape.grad_of(a.id).array() += g.array().rowwise() * NCD_VAL(row.id).row(0).array();
    if (NCD_NEEDS(row.id)) tape.grad_of(row.id) += g.cwiseProduct(NCD_VAL(a.id)).colwise().sum();
  });
}

Var Tape::scale(Var a, double s) {
  return push("scale", value(a) * s, {a}, [a, s](Tape& tape, int self) { tape.grad_of(a.id) += s * NCD_GRAD(self); });
}

Var Tape::add_scalar(Var a, double s) {
  return push("add_scalar", value(a).array() + s, {a},
              [a](Tape& tape, int self) { tape.grad_of(a.id) += NCD_GRAD(self); });
}

Var Tape::tanh(Var a) {
  return push("tanh", value(a).array().tanh().matrix(), {a}, [a](Tape& tape, int self) {
    const Matrix& y = NCD_VAL(self);
    tape.grad_of(a.id).array() += NCD_GRAD(self).array() * (1.0 - y.array().square());
  });
}

Var Tape::sigmoid(Var a) {
  Matrix y = value(a).unaryExpr([](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return push("sigmoid", std::move(y), {a}, [a](Tape& tape, int self) {
    const Matrix& y = NCD_VAL(self);
    tape.grad_of(a.id).array() += NCD_GRAD(self).array() * y.array() * (1.0 - y.array());
  });
}

Var Tape::celu(Var a, double alpha) {
  Matrix y = value(a).unaryExpr([alpha](double x) { return x >= 0.0 ? x : alpha * std::expm1(x / alpha); });
  return push("celu", std::move(y), {a}, [a, alpha](Tape& tape, int self) {
    const Matrix d = NCD_VAL(a.id).unaryExpr([alpha](double x) { return x >= 0.0 ? 1.0 : std::exp(x / alpha); });
    tape.grad_of(a.id).array() += NCD_GRAD(self).array() * d.array();
  });
}

Var Tape::relu(Var a) {
  return push("relu", value(a).cwiseMax(0.0), {a}, [a](Tape& tape, int self) {
    const Matrix d = NCD_VAL(a.id).unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; });
    tape.grad_of(a.id).array() += NCD_GRAD(self).array() * d.array();
  });
}

Var Tape::abs(Var a) {
  return push("abs", value(a).cwiseAbs(), {a}, [a](Tape& tape, int self) {
    const Matrix d = NCD_VAL(a.id).unaryExpr([](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
    tape.grad_of(a.id).array() += NCD_GRAD(self).array() * d.array();
  });
}

Var Tape::square(Var a) {
  return push("square", value(a).array().square().matrix(), {a}, [a](Tape& tape, int self) {
    tape.grad_of(a.id).array() += 2.0 * NCD_GRAD(self).array() * NCD_VAL(a.id).array();
  });
}

Var Tape::xlogx(Var a) {
  Matrix y = value(a).unaryExpr([](double x) { return x > 0.0 ? x * std::log(x) : 0.0; });
  return push("xlogx", std::move(y), {a}, [a](Tape& tape, int self) {
    const Matrix d = NCD_VAL(a.id).unaryExpr([](double x) { return std::log(std::max(x, 1e-300)) + 1.0; });
    tape.grad_of(a.id).array() += NCD_GRAD(self).array() * d.array();
  });
}

Var Tape::softmax_rows(Var a) {
  const Matrix& x = value(a);
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  return push("softmax_rows", std::move(y), {a}, [a](Tape& tape, int self) {
    const Matrix& y = NCD_VAL(self);
    const Matrix& g = NCD_GRAD(self);
    const Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
    tape.grad_of(a.id).array() += y.array() * (g.colwise() - dot).array();
  });
}

Var Tape::bce_with_logits(Var logits, const Matrix& targets) {
  require_same_shape(value(logits), targets, "bce_with_logits");
  const Matrix& x = value(logits);
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x(i);
    const double softplus = v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
    y(i) = softplus - targets(i) * v;
  }
  return push("bce_with_logits", std::move(y), {logits}, [logits, targets](Tape& tape, int self) {
    const Matrix p = NCD_VAL(logits.id).unaryExpr([](double v) {
      return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    });
    tape.grad_of(logits.id).array() += NCD_GRAD(self).array() * (p - targets).array();
  });
}

Var Tape::sum(Var a) {
  Matrix y(1, 1);
  y(0, 0) = value(a).sum();
  return push("sum", std::move(y), {a},
              [a](Tape& tape, int self) { tape.grad_of(a.id).array() += NCD_GRAD(self)(0, 0); });
}

Var Tape::mean(Var a) {
  const double n = static_cast<double>(value(a).size());
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "mean of an empty matrix");
  Matrix y(1, 1);
  y(0, 0) = value(a).sum() / n;
  return push("mean", std::move(y), {a},
              [a, n](Tape& tape, int self) { tape.grad_of(a.id).array() += NCD_GRAD(self)(0, 0) / n; });
}

Var Tape::row_sums(Var a) {
  return push("row_sums", value(a).rowwise().sum(), {a}, [a](Tape& tape, int self) {
    tape.grad_of(a.id).colwise() += NCD_GRAD(self).col(0);
  });
}

Var Tape::slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > value(a).cols())
    throw Error(ErrorCode::kDimensionMismatch, "slice_cols out of range");
  return push("slice_cols", value(a).middleCols(start, count), {a}, [a, start, count](Tape& tape, int self) {
    tape.grad_of(a.id).middleCols(start, count) += NCD_GRAD(self);
  });
}

Var Tape::slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > value(a).rows())
    throw Error(ErrorCode::kDimensionMismatch, "slice_rows out of range");
  return push("slice_rows", value(a).middleRows(start, count), {a}, [a, start, count](Tape& tape, int self) {
    tape.grad_of(a.id).middleRows(start, count) += NCD_GRAD(self);
  });
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorCode::kInvalidArgument, "concat_cols of nothing");
  const Eigen::Index rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    if (value(p).rows() != rows) throw Error(ErrorCode::kDimensionMismatch, "concat_cols: row counts differ");
    cols += value(p).cols();
  }
  Matrix y(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    y.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  std::vector<Var> ids(parts.begin(), parts.end());
  Var out = push("concat_cols", std::move(y), {}, nullptr);
  Node& n = nodes_.back();
  for (Var p : ids) n.needsGrad = n.needsGrad || node(p).needsGrad;
  if (n.needsGrad)
    n.back = [ids](Tape& tape, int self) {
      Eigen::Index offset = 0;
      for (Var p : ids) {
        const Eigen::Index c = NCD_VAL(p.id).cols();
        if (NCD_NEEDS(p.id)) tape.grad_of(p.id) += NCD_GRAD(self).middleCols(offset, c);
        offset += c;
      }
    };
  return out;
}

Var Tape::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorCode::kInvalidArgument, "concat_rows of nothing");
  const Eigen::Index cols = value(parts[0]).cols();
  Eigen::Index rows = 0;
  for (Var p : parts) {
    if (value(p).cols() != cols) throw Error(ErrorCode::kDimensionMismatch, "concat_rows: column counts differ");
    rows += value(p).rows();
  }
  Matrix y(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    y.middleRows(at, value(p).rows()) = value(p);
    at += value(p).rows();
  }
  std::vector<Var> ids(parts.begin(), parts.end());
  Var out = push("concat_rows", std::move(y), {}, nullptr);
  Node& n = nodes_.back();
  for (Var p : ids) n.needsGrad = n.needsGrad || node(p).needsGrad;
  if (n.needsGrad)
    n.back = [ids](Tape& tape, int self) {
      Eigen::Index offset = 0;
      for (Var p : ids) {
        const Eigen::Index r = NCD_VAL(p.id).rows();
        if (NCD_NEEDS(p.id)) tape.grad_of(p.id) += NCD_GRAD(self).middleRows(offset, r);
        offset += r;
      }
    };
  return out;
}

Var Tape::transpose(Var a) {
  return push("transpose", value(a).transpose(), {a},
              [a](Tape& tape, int self) { tape.grad_of(a.id) += NCD_GRAD(self).transpose(); });
}

Var Tape::repeat_cols_each(Var a, int times) {
  const Matrix& x = value(a);
  Matrix y(x.rows(), x.cols() * times);
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (int k = 0; k < times; ++k) y.col(j * times + k) = x.col(j);
  return push("repeat_cols_each", std::move(y), {a}, [a, times](Tape& tape, int self) {
    const Matrix& g = NCD_GRAD(self);
    Matrix& ga = tape.grad_of(a.id);
    for (Eigen::Index j = 0; j < ga.cols(); ++j)
      for (int k = 0; k < times; ++k) ga.col(j) += g.col(j * times + k);
  });
}

Var Tape::gather_rows(Var a, std::vector<int> rows) {
  const Matrix& x = value(a);
  Matrix y(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= x.rows()) throw Error(ErrorCode::kDimensionMismatch, "gather_rows index out of range");
    y.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  }
  return push("gather_rows", std::move(y), {a}, [a, rows = std::move(rows)](Tape& tape, int self) {
    const Matrix& g = NCD_GRAD(self);
    Matrix& ga = tape.grad_of(a.id);
    for (std::size_t i = 0; i < rows.size(); ++i) ga.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

#undef NCD_VAL
#undef NCD_NEEDS
#undef NCD_GRAD

void Tape::backward(Var output) {
  const Node& out = node(output);
  if (out.val().rows() != 1 || out.val().cols() != 1)
    throw Error(ErrorCode::kInvalidArgument, "backward needs a 1 x 1 output");
  for (Node& n : nodes_) n.hasGrad = false;
  grad_of(output.id)(0, 0) = 1.0;
  for (int i = output.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.hasGrad || !n.needsGrad) continue;
    if (n.back) n.back(*this, i);
    if (n.param) n.param->grad += n.grad;
  }
}

}  // namespace ncd::nn
