#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "isqn/matrix.hpp"
#include "isqn/params.hpp"
#include "isqn/tape.hpp"

namespace isqn {

class Rng;

inline constexpr double kLayerNormEps = 1e-5;

/// Affine layer, optionally followed by LayerNorm and ReLU (LayerNorm sits
/// before the activation).
struct DenseLayer {
  std::string name;
  ParamId weight = 0;  // in × out
  ParamId bias = 0;    // 1 × out
  std::optional<ParamId> ln_gain;
  std::optional<ParamId> ln_bias;
  bool relu = true;
};

/// Adds a layer to `params` with fan-in uniform initialization. LayerNorm
/// parameters start at gain 1, offset 0.
DenseLayer make_dense_layer(ParamSet& params, const std::string& name, std::size_t in,
                            std::size_t out, bool relu, bool layernorm, Rng& rng);

struct MlpTrace {
  NodeId output = 0;
  /// Post-activation output of every ReLU layer.
  std::vector<NodeId> activations;
};

/// Records the network on `tape`, reading weights from `params`.
MlpTrace forward_mlp(Tape& tape, const ParamSet& params, std::span<const DenseLayer> layers,
                     NodeId input, bool use_layernorm);

struct MlpForward {
  Tape tape;
  NodeId output = 0;
  std::vector<Matrix> activations;
  const Matrix& value() const { return tape.value(output); }
};

MlpForward forward_mlp(const ParamSet& params, std::span<const DenseLayer> layers,
                       const Matrix& input, bool use_layernorm);

/// Tape-free evaluation, used for acting and diagnostics.
Matrix evaluate_mlp(const ParamSet& params, std::span<const DenseLayer> layers, const Matrix& input,
                    bool use_layernorm, std::vector<Matrix>* activations = nullptr);

}  // namespace isqn
