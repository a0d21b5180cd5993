#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "isqn/mdp.hpp"

namespace isqn {

struct IqmResult {
  double value = 0.0;
  /// Fewer than four values: `value` is the plain mean.
  bool plain_mean = false;
};

/// Mean after dropping ⌊n/4⌋ values from each end of the sorted input.
IqmResult iqm(std::span<const double> values);

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
  /// Every stratum has a single value, so every resample is identical.
  bool degenerate = false;
};

/// Percentile bootstrap of the pooled IQM. Each stratum (one per environment)
/// is resampled with replacement on its own; quantiles interpolate linearly
/// between order statistics.
ConfidenceInterval stratified_bootstrap_ci(const std::vector<std::vector<double>>& strata,
                                           std::size_t n_boot = 2000, double level = 0.95,
                                           std::uint64_t seed = 0);

/// Linear-interpolation quantile of already sorted values, q in [0, 1].
double sorted_quantile(std::span<const double> sorted, double q);

/// Σ_epochs (return − random) / (reference − random).
double auc(std::span<const double> returns, const Normalizer& normalizer);

}  // namespace isqn
