#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "isqn/losses.hpp"
#include "isqn/optim.hpp"
#include "isqn/qnet.hpp"

namespace isqn {

/// Loss coefficients α = softmax(z) learned by meta-gradient descent.
class MetaCoefficients {
 public:
  MetaCoefficients(std::size_t links, double meta_learning_rate);

  std::size_t size() const { return logits_.size(); }
  double meta_learning_rate() const { return meta_lr_; }
  std::span<const double> logits() const { return logits_; }
  void set_logits(std::vector<double> logits);
  std::vector<double> alphas() const;
  /// z ← z − λ_α·grad
  void descend(std::span<const double> logit_gradient);

 private:
  std::vector<double> logits_;
  double meta_lr_;
};

struct MetaGradient {
  /// ∂/∂α_k of the outer objective Σ_i L(θ(α)_i, θ(α)_{i−1}).
  std::vector<double> alpha;
  /// The same gradient pulled back through the softmax onto the logits.
  std::vector<double> logits;
};

/// One-step meta-gradient for an IteratedShared network.
///
/// θ(α) is one SGD step of size `lr_theta` on Σ_k α_k·L_k from the current
/// parameters. With g_k = ∇L_k(θ) and h_k = ∇L_k(θ(α)) the gradient is
///   ∂/∂α_k = −λ_θ·( h_k[ω_k]·g_k[ω_k] + (Σ_i h_i)[ω]·g_k[ω] ),
/// where [ω_k] selects head k and [ω] the shared torso. Targets are treated
/// as constants, matching the stop-gradient in every term.
MetaGradient meta_gradient(const MetaCoefficients& coeffs, const MultiHeadQNet& net,
                           const Batch& batch, const LossConfig& config, double lr_theta);

/// Applies meta_gradient to the logits and returns it. The derivation assumes
/// a plain SGD inner step, so any other inner optimizer is rejected.
MetaGradient meta_update(MetaCoefficients& coeffs, const MultiHeadQNet& net, const Batch& batch,
                         const LossConfig& config, double lr_theta, OptimizerKind inner);

}  // namespace isqn
