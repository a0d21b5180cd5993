#pragma once

#include <cstdint>
#include <vector>

#include "isqn/matrix.hpp"
#include "isqn/params.hpp"

namespace isqn {

enum class OptimizerKind { Adam, Sgd };

struct AdamConfig {
  double learning_rate = 6.25e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1.5e-4;
};

class AdamState {
 public:
  AdamState(const ParamSet& params, AdamConfig config);

  const AdamConfig& config() const { return config_; }
  std::uint64_t steps() const { return steps_; }
  const std::vector<Matrix>& first_moment() const { return m_; }
  const std::vector<Matrix>& second_moment() const { return v_; }

 private:
  friend void adam_step(AdamState&, ParamSet&, const Gradients&);

  AdamConfig config_;
  std::uint64_t steps_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

/// Bias-corrected Adam update of every non-frozen parameter.
/// Throws NumericError on non-finite gradients (nothing is modified) or if an
/// updated parameter ends up non-finite.
void adam_step(AdamState& state, ParamSet& params, const Gradients& grads);

/// params ← params − lr·grads for every non-frozen parameter.
void sgd_step(ParamSet& params, const Gradients& grads, double learning_rate);

}  // namespace isqn
