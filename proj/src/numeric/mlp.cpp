#include "isqn/mlp.hpp"

#include <cmath>

#include "isqn/errors.hpp"
#include "isqn/rng.hpp"

namespace isqn {

namespace {

void check_layer_shapes(const ParamSet& params, const DenseLayer& layer, std::size_t in_cols,
                        bool use_layernorm) {
  const Matrix& w = params[layer.weight];
  const Matrix& b = params[layer.bias];
  if (w.rows() != in_cols) {
    throw ConfigError("layer '" + layer.name + "' expects input width " + std::to_string(w.rows()) +
                      ", got " + std::to_string(in_cols));
  }
  if (b.rows() != 1 || b.cols() != w.cols()) {
    throw ConfigError("layer '" + layer.name + "' bias shape does not match its weight");
  }
  if (use_layernorm && layer.relu && !(layer.ln_gain && layer.ln_bias)) {
    throw ConfigError("layer '" + layer.name + "' has no LayerNorm parameters");
  }
}

}  // namespace

DenseLayer make_dense_layer(ParamSet& params, const std::string& name, std::size_t in,
                            std::size_t out, bool relu, bool layernorm, Rng& rng) {
  if (in == 0 || out == 0) throw ConfigError("layer '" + name + "' has a zero dimension");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Matrix w(in, out), b(1, out);
  for (double& v : w.data()) v = rng.uniform(-bound, bound);
  for (double& v : b.data()) v = rng.uniform(-bound, bound);
  DenseLayer layer;
  layer.name = name;
  layer.relu = relu;
  layer.weight = params.add(name + ".W", std::move(w));
  layer.bias = params.add(name + ".b", std::move(b));
  if (layernorm && relu) {
    layer.ln_gain = params.add(name + ".ln.gain", Matrix(1, out, 1.0));
    layer.ln_bias = params.add(name + ".ln.bias", Matrix(1, out, 0.0));
  }
  return layer;
}

MlpTrace forward_mlp(Tape& tape, const ParamSet& params, std::span<const DenseLayer> layers,
                     NodeId input, bool use_layernorm) {
  MlpTrace trace;
  NodeId x = input;
  for (const auto& layer : layers) {
    check_layer_shapes(params, layer, tape.value(x).cols(), use_layernorm);
    x = tape.matmul(x, tape.param(params, layer.weight));
    x = tape.add_row(x, tape.param(params, layer.bias));
    if (layer.relu) {
      if (use_layernorm) {
        x = tape.layernorm(x, tape.param(params, *layer.ln_gain), tape.param(params, *layer.ln_bias),
                           kLayerNormEps);
      }
      x = tape.relu(x);
      trace.activations.push_back(x);
    }
    tape.value(x).require_finite("layer '" + layer.name + "'");
  }
  trace.output = x;
  return trace;
}

MlpForward forward_mlp(const ParamSet& params, std::span<const DenseLayer> layers,
                       const Matrix& input, bool use_layernorm) {
  input.require_finite("mlp input");
  MlpForward result;
  const NodeId in = result.tape.constant(input);
  const MlpTrace trace = forward_mlp(result.tape, params, layers, in, use_layernorm);
  result.output = trace.output;
  for (NodeId a : trace.activations) result.activations.push_back(result.tape.value(a));
  return result;
}

Matrix evaluate_mlp(const ParamSet& params, std::span<const DenseLayer> layers, const Matrix& input,
                    bool use_layernorm, std::vector<Matrix>* activations) {
  Matrix x = input;
  for (const auto& layer : layers) {
    check_layer_shapes(params, layer, x.cols(), use_layernorm);
    x = matmul(x, params[layer.weight]);
    add_row_inplace(x, params[layer.bias]);
    if (layer.relu) {
      if (use_layernorm) {
        x = layernorm_rows(x, params[*layer.ln_gain], params[*layer.ln_bias], kLayerNormEps);
      }
      relu_inplace(x);
      if (activations) activations->push_back(x);
    }
    x.require_finite("layer '" + layer.name + "'");
  }
  return x;
}

}  // namespace isqn
