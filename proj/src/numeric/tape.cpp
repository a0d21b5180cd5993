#include "isqn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "isqn/errors.hpp"

namespace isqn {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) throw ConfigError(std::string("shape mismatch in tape op ") + op);
}

void accumulate(Matrix& into, const Matrix& g) {
  if (into.empty()) {
    into = g;
    return;
  }
  auto dst = into.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Row-wise softmax of factor·x, returned together with the row maxima.
Matrix softmax_rows(const Matrix& x, double factor, std::vector<double>& row_max,
                    std::vector<double>& row_log_norm) {
  Matrix p(x.rows(), x.cols());
  row_max.assign(x.rows(), 0.0);
  row_log_norm.assign(x.rows(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto r = x.row(i);
    const double m = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) {
      p(i, j) = std::exp(factor * (r[j] - m));
      z += p(i, j);
    }
    for (std::size_t j = 0; j < r.size(); ++j) p(i, j) /= z;
    row_max[i] = m;
    row_log_norm[i] = std::log(z);
  }
  return p;
}

}  // namespace

Tape::Node Tape::make_node(TapeOp op, std::initializer_list<NodeId> inputs) {
  Node n;
  n.op = op;
  n.n_inputs = inputs.size();
  std::size_t i = 0;
  for (NodeId id : inputs) n.in[i++] = id;
  return n;
}

NodeId Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

const Tape::Node& Tape::at(NodeId id) const {
  if (id >= nodes_.size()) throw UsageError("tape node id out of range");
  return nodes_[id];
}

double Tape::scalar(NodeId id) const {
  const Matrix& v = value(id);
  if (v.rows() != 1 || v.cols() != 1) throw UsageError("tape node is not a scalar");
  return v(0, 0);
}

NodeId Tape::constant(Matrix value) {
  Node n = make_node(TapeOp::Constant, {});
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Tape::param(const ParamSet& params, ParamId id) {
  Node n = make_node(TapeOp::Param, {});
  n.value = params[id];
  n.owner = &params;
  n.param = id;
  n.requires_grad = true;
  return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  Node n = make_node(TapeOp::MatMul, {a, b});
  n.value = isqn::matmul(at(a).value, at(b).value);
  n.requires_grad = at(a).requires_grad || at(b).requires_grad;
  return push(std::move(n));
}

NodeId Tape::add_row(NodeId x, NodeId bias) {
  Node n = make_node(TapeOp::AddRow, {x, bias});
  n.value = at(x).value;
  add_row_inplace(n.value, at(bias).value);
  n.requires_grad = at(x).requires_grad || at(bias).requires_grad;
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
  require_same_shape(at(a).value, at(b).value, "add");
  Node n = make_node(TapeOp::Add, {a, b});
  n.value = at(a).value;
  auto dst = n.value.data();
  auto src = at(b).value.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  n.requires_grad = at(a).requires_grad || at(b).requires_grad;
  return push(std::move(n));
}

NodeId Tape::sub(NodeId a, NodeId b) {
  require_same_shape(at(a).value, at(b).value, "sub");
  Node n = make_node(TapeOp::Sub, {a, b});
  n.value = at(a).value;
  auto dst = n.value.data();
  auto src = at(b).value.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= src[i];
  n.requires_grad = at(a).requires_grad || at(b).requires_grad;
  return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double factor) {
  Node n = make_node(TapeOp::Scale, {a});
  n.value = at(a).value;
  for (double& v : n.value.data()) v *= factor;
  n.scalar = factor;
  n.requires_grad = at(a).requires_grad;
  return push(std::move(n));
}

NodeId Tape::relu(NodeId a) {
  Node n = make_node(TapeOp::Relu, {a});
  n.value = at(a).value;
  relu_inplace(n.value);
  n.requires_grad = at(a).requires_grad;
  return push(std::move(n));
}

NodeId Tape::layernorm(NodeId x, NodeId gain, NodeId bias, double eps) {
  Node n = make_node(TapeOp::LayerNorm, {x, gain, bias});
  n.value = layernorm_rows(at(x).value, at(gain).value, at(bias).value, eps, &n.aux_a, &n.aux_row);
  n.scalar = eps;
  n.requires_grad = at(x).requires_grad || at(gain).requires_grad || at(bias).requires_grad;
  return push(std::move(n));
}

NodeId Tape::square(NodeId a) {
  Node n = make_node(TapeOp::Square, {a});
  n.value = at(a).value;
  for (double& v : n.value.data()) v *= v;
  n.requires_grad = at(a).requires_grad;
  return push(std::move(n));
}

NodeId Tape::sum(NodeId a) {
  Node n = make_node(TapeOp::Sum, {a});
  double s = 0.0;
  for (double v : at(a).value.data()) s += v;
  n.value = Matrix(1, 1, s);
  n.requires_grad = at(a).requires_grad;
  return push(std::move(n));
}

NodeId Tape::mean(NodeId a) {
  const std::size_t count = at(a).value.size();
  if (count == 0) throw UsageError("mean of an empty node");
  Node n = make_node(TapeOp::Mean, {a});
  double s = 0.0;
  for (double v : at(a).value.data()) s += v;
  n.value = Matrix(1, 1, s / static_cast<double>(count));
  n.requires_grad = at(a).requires_grad;
  return push(std::move(n));
}

NodeId Tape::max_row(NodeId a) {
  const Matrix& x = at(a).value;
  if (x.cols() == 0) throw UsageError("max over an empty row");
  Node n = make_node(TapeOp::MaxRow, {a});
  n.value = Matrix(x.rows(), 1);
  n.index.resize(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto r = x.row(i);
    // lowest index wins ties
    const auto it = std::max_element(r.begin(), r.end());
    n.index[i] = static_cast<std::size_t>(it - r.begin());
    n.value(i, 0) = *it;
  }
  n.requires_grad = at(a).requires_grad;
  return push(std::move(n));
}

NodeId Tape::logsumexp_row(NodeId a) {
  const Matrix& x = at(a).value;
  if (x.cols() == 0) throw UsageError("logsumexp over an empty row");
  Node n = make_node(TapeOp::LogSumExpRow, {a});
  std::vector<double> m, log_z;
  n.aux_a = softmax_rows(x, 1.0, m, log_z);
  n.value = Matrix(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i) n.value(i, 0) = m[i] + log_z[i];
  n.requires_grad = at(a).requires_grad;
  return push(std::move(n));
}

NodeId Tape::mellowmax_row(NodeId a, double omega) {
  const Matrix& x = at(a).value;
  if (x.cols() == 0) throw UsageError("mellowmax over an empty row");
  if (!(omega > 0.0)) throw ConfigError("mellowmax temperature must be positive");
  Node n = make_node(TapeOp::MellowMaxRow, {a});
  std::vector<double> m, log_z;
  n.aux_a = softmax_rows(x, omega, m, log_z);
  n.value = Matrix(x.rows(), 1);
  const double log_n = std::log(static_cast<double>(x.cols()));
  for (std::size_t i = 0; i < x.rows(); ++i) n.value(i, 0) = m[i] + (log_z[i] - log_n) / omega;
  n.scalar = omega;
  n.requires_grad = at(a).requires_grad;
  return push(std::move(n));
}

NodeId Tape::gather(NodeId a, std::vector<std::size_t> index) {
  const Matrix& x = at(a).value;
  if (index.size() != x.rows()) throw UsageError("gather index length != rows");
  Node n = make_node(TapeOp::Gather, {a});
  n.value = Matrix(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (index[i] >= x.cols()) throw UsageError("gather index out of range");
    n.value(i, 0) = x(i, index[i]);
  }
  n.index = std::move(index);
  n.requires_grad = at(a).requires_grad;
  return push(std::move(n));
}

NodeId Tape::affine_const(NodeId a, Matrix factor, Matrix offset) {
  const Matrix& x = at(a).value;
  require_same_shape(x, factor, "affine_const");
  require_same_shape(x, offset, "affine_const");
  Node n = make_node(TapeOp::AffineConst, {a});
  n.value = offset;
  for (std::size_t i = 0; i < x.size(); ++i) n.value.data()[i] += factor.data()[i] * x.data()[i];
  n.aux_a = std::move(factor);
  n.requires_grad = at(a).requires_grad;
  return push(std::move(n));
}

NodeId Tape::stop_gradient(NodeId a) {
  Node n = make_node(TapeOp::StopGradient, {a});
  n.value = at(a).value;
  n.requires_grad = false;
  return push(std::move(n));
}

Gradients Tape::backward(NodeId loss, const ParamSet& params, double seed) const {
  const Node& root = at(loss);
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw UsageError("backward requires a scalar (1x1) loss node");
  }
  Gradients out = zeros_like(params);
  if (!root.requires_grad) return out;

  std::vector<Matrix> g(loss + 1);
  g[loss] = Matrix(1, 1, seed);

  auto wants = [&](NodeId id) { return nodes_[id].requires_grad; };

  for (std::size_t step = loss + 1; step-- > 0;) {
    const Node& n = nodes_[step];
    if (!n.requires_grad || g[step].empty()) continue;
    const Matrix& d = g[step];
    switch (n.op) {
      case TapeOp::Constant:
      case TapeOp::StopGradient:
        break;
      case TapeOp::Param:
        if (n.owner == &params) accumulate(out[n.param], d);
        break;
      case TapeOp::MatMul: {
        const Matrix& a = nodes_[n.in[0]].value;
        const Matrix& b = nodes_[n.in[1]].value;
        if (wants(n.in[0])) accumulate(g[n.in[0]], matmul_nt(d, b));
        if (wants(n.in[1])) accumulate(g[n.in[1]], matmul_tn(a, d));
        break;
      }
      case TapeOp::AddRow: {
        if (wants(n.in[0])) accumulate(g[n.in[0]], d);
        if (wants(n.in[1])) {
          Matrix db(1, d.cols());
          for (std::size_t i = 0; i < d.rows(); ++i)
            for (std::size_t j = 0; j < d.cols(); ++j) db(0, j) += d(i, j);
          accumulate(g[n.in[1]], db);
        }
        break;
      }
      case TapeOp::Add:
        if (wants(n.in[0])) accumulate(g[n.in[0]], d);
        if (wants(n.in[1])) accumulate(g[n.in[1]], d);
        break;
      case TapeOp::Sub:
        if (wants(n.in[0])) accumulate(g[n.in[0]], d);
        if (wants(n.in[1])) {
          Matrix neg = d;
          for (double& v : neg.data()) v = -v;
          accumulate(g[n.in[1]], neg);
        }
        break;
      case TapeOp::Scale: {
        Matrix s = d;
        for (double& v : s.data()) v *= n.scalar;
        accumulate(g[n.in[0]], s);
        break;
      }
      case TapeOp::Relu: {
        Matrix s = d;
        for (std::size_t i = 0; i < s.size(); ++i)
          if (!(n.value.data()[i] > 0.0)) s.data()[i] = 0.0;
        accumulate(g[n.in[0]], s);
        break;
      }
      case TapeOp::LayerNorm: {
        const Matrix& xhat = n.aux_a;
        const Matrix& gain = nodes_[n.in[1]].value;
        const std::size_t rows = d.rows(), cols = d.cols();
        if (wants(n.in[1]) || wants(n.in[2])) {
          Matrix dgain(1, cols), dbias(1, cols);
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) {
              dgain(0, j) += d(i, j) * xhat(i, j);
              dbias(0, j) += d(i, j);
            }
          if (wants(n.in[1])) accumulate(g[n.in[1]], dgain);
          if (wants(n.in[2])) accumulate(g[n.in[2]], dbias);
        }
        if (wants(n.in[0])) {
          Matrix dx(rows, cols);
          const double inv_n = 1.0 / static_cast<double>(cols);
          for (std::size_t i = 0; i < rows; ++i) {
            double mean_dxh = 0.0, mean_dxh_xh = 0.0;
            for (std::size_t j = 0; j < cols; ++j) {
              const double dxh = d(i, j) * gain(0, j);
              mean_dxh += dxh;
              mean_dxh_xh += dxh * xhat(i, j);
            }
            mean_dxh *= inv_n;
            mean_dxh_xh *= inv_n;
            for (std::size_t j = 0; j < cols; ++j) {
              const double dxh = d(i, j) * gain(0, j);
              dx(i, j) = n.aux_row[i] * (dxh - mean_dxh - xhat(i, j) * mean_dxh_xh);
            }
          }
          accumulate(g[n.in[0]], dx);
        }
        break;
      }
      case TapeOp::Square: {
        const Matrix& a = nodes_[n.in[0]].value;
        Matrix s = d;
        for (std::size_t i = 0; i < s.size(); ++i) s.data()[i] *= 2.0 * a.data()[i];
        accumulate(g[n.in[0]], s);
        break;
      }
      case TapeOp::Sum:
      case TapeOp::Mean: {
        const Matrix& a = nodes_[n.in[0]].value;
        double v = d(0, 0);
        if (n.op == TapeOp::Mean) v /= static_cast<double>(a.size());
        accumulate(g[n.in[0]], Matrix(a.rows(), a.cols(), v));
        break;
      }
      case TapeOp::MaxRow:
      case TapeOp::Gather: {
        const Matrix& a = nodes_[n.in[0]].value;
        Matrix s(a.rows(), a.cols());
        for (std::size_t i = 0; i < a.rows(); ++i) s(i, n.index[i]) = d(i, 0);
        accumulate(g[n.in[0]], s);
        break;
      }
      case TapeOp::LogSumExpRow:
      case TapeOp::MellowMaxRow: {
        Matrix s = n.aux_a;
        for (std::size_t i = 0; i < s.rows(); ++i)
          for (std::size_t j = 0; j < s.cols(); ++j) s(i, j) *= d(i, 0);
        accumulate(g[n.in[0]], s);
        break;
      }
      case TapeOp::AffineConst: {
        Matrix s = d;
        for (std::size_t i = 0; i < s.size(); ++i) s.data()[i] *= n.aux_a.data()[i];
        accumulate(g[n.in[0]], s);
        break;
      }
    }
  }
  return out;
}

}  // namespace isqn
