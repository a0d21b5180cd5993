#include "isqn/train_config.hpp"

#include <algorithm>

#include "isqn/errors.hpp"

namespace isqn {

double EpsilonSchedule::at(std::size_t step) const {
  if (decay_steps == 0 || step >= decay_steps) return end;
  const double frac = static_cast<double>(step) / static_cast<double>(decay_steps);
  return start + frac * (end - start);
}

void TrainConfig::validate() const {
  net.validate();
  if (T < 1) throw ConfigError("T must be at least 1");
  if (G < 1) throw ConfigError("G must be at least 1");
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (buffer_capacity < 1) throw ConfigError("buffer capacity must be positive");
  if (warmup > buffer_capacity) throw ConfigError("warmup exceeds the buffer capacity");
  if (epoch_steps < 1) throw ConfigError("epoch length must be positive");
  if (horizon < 1) throw ConfigError("horizon must be positive");
  if (!(0.0 <= epsilon.end && epsilon.end <= epsilon.start && epsilon.start <= 1.0)) {
    throw ConfigError("epsilon schedule needs 0 <= end <= start <= 1");
  }
  loss.validate();
  if (loss.weighting == Weighting::Meta) {
    if (net.mode != NetMode::IteratedShared) {
      throw ConfigError("meta weighting is only defined for the iS mode");
    }
    if (optimizer != OptimizerKind::Sgd) {
      throw ConfigError("meta weighting requires the SGD optimizer");
    }
  }
  if (optimizer == OptimizerKind::Sgd && !(sgd_lr > 0.0)) throw ConfigError("SGD learning rate must be positive");
  if (optimizer == OptimizerKind::Adam && !(adam.learning_rate > 0.0)) throw ConfigError("Adam learning rate must be positive");
  if (diagnostics.features && diagnostics.probe_size < 1) throw ConfigError("probe size must be positive");
  if (!(diagnostics.srank_delta > 0.0 && diagnostics.srank_delta < 1.0)) {
    throw ConfigError("srank delta must lie in (0, 1)");
  }
  if (!(diagnostics.dormant_tau >= 0.0)) throw ConfigError("dormant threshold must be non-negative");
}

double TrainConfig::learning_rate() const {
  return optimizer == OptimizerKind::Sgd ? sgd_lr : adam.learning_rate;
}

}  // namespace isqn
