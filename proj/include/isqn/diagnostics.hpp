#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "isqn/losses.hpp"
#include "isqn/matrix.hpp"
#include "isqn/qnet.hpp"

namespace isqn {

enum class ChurnTarget { Freshest, AllLinks };

/// mean_b |y_after − y_before| for the regression target of the last link,
/// or the average over links with ChurnTarget::AllLinks.
double target_churn(const MultiHeadQNet& before, const MultiHeadQNet& after, const Batch& batch,
                    const LossConfig& config, ChurnTarget which = ChurnTarget::Freshest);

/// Per-step churn summed within a target period and cleared on every target
/// update; `period_mean` averages the steps seen since the last reset.
class ChurnAccumulator {
 public:
  void add(double churn);
  void reset();
  double total() const { return total_; }
  std::size_t steps() const { return steps_; }
  double period_mean() const;

 private:
  double total_ = 0.0;
  std::size_t steps_ = 0;
};

/// ⟨a,b⟩ / (‖a‖‖b‖), or 0 when either norm vanishes.
double grad_cosine(std::span<const double> a, std::span<const double> b);

/// Singular values in descending order by one-sided Jacobi rotations.
std::vector<double> singular_values(const Matrix& m);

struct SrankResult {
  std::size_t rank = 0;
  bool all_zero = false;
};

/// Smallest k with (σ_1 + … + σ_k) / Σσ ≥ 1 − δ.
SrankResult srank(const Matrix& features, double delta = 0.01);
SrankResult srank_from_singular_values(std::span<const double> sigma, double delta = 0.01);

/// Fraction of hidden units whose mean |activation|, divided by the layer
/// average of that quantity, is at most τ. A layer that is zero everywhere
/// counts entirely as dormant.
double dormant_fraction(std::span<const Matrix> activations, double tau = 0.025);

}  // namespace isqn
