#include "isqn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "isqn/errors.hpp"
#include "isqn/rng.hpp"

namespace isqn {

namespace {

double sorted_iqm(std::span<const double> sorted) {
  const std::size_t n = sorted.size();
  if (n < 4) return std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
  const std::size_t cut = n / 4;
  double acc = 0.0;
  for (std::size_t i = cut; i < n - cut; ++i) acc += sorted[i];
  return acc / static_cast<double>(n - 2 * cut);
}

}  // namespace

IqmResult iqm(std::span<const double> values) {
  if (values.empty()) throw ConfigError("IQM of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return {sorted_iqm(sorted), sorted.size() < 4};
}

double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ConfigError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("quantile level must lie in [0, 1]");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

ConfidenceInterval stratified_bootstrap_ci(const std::vector<std::vector<double>>& strata,
                                           std::size_t n_boot, double level, std::uint64_t seed) {
  if (n_boot < 1000) throw ConfigError("bootstrap needs at least 1000 resamples");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
  if (strata.empty()) throw ConfigError("bootstrap needs at least one stratum");
  std::size_t pooled_size = 0;
  bool degenerate = true;
  for (const auto& s : strata) {
    if (s.empty()) throw ConfigError("bootstrap stratum is empty");
    pooled_size += s.size();
    if (s.size() > 1) degenerate = false;
  }
  if (degenerate) {
    std::vector<double> pooled;
    for (const auto& s : strata) pooled.insert(pooled.end(), s.begin(), s.end());
    const double point = iqm(pooled).value;
    return {point, point, true};
  }
  Rng rng = Rng::stream(seed, "bootstrap");
  std::vector<double> stats(n_boot), sample(pooled_size);
  for (std::size_t b = 0; b < n_boot; ++b) {
    std::size_t at = 0;
    for (const auto& s : strata)
      for (std::size_t i = 0; i < s.size(); ++i) sample[at++] = s[rng.below(s.size())];
    std::sort(sample.begin(), sample.end());
    stats[b] = sorted_iqm(sample);
  }
  std::sort(stats.begin(), stats.end());
  const double tail = (1.0 - level) / 2.0;
  return {sorted_quantile(stats, tail), sorted_quantile(stats, 1.0 - tail), false};
}

double auc(std::span<const double> returns, const Normalizer& normalizer) {
  if (returns.empty()) throw ConfigError("AUC needs at least one epoch");
  double total = 0.0;
  for (double r : returns) total += normalizer.normalize(r);
  return total;
}

}  // namespace isqn
