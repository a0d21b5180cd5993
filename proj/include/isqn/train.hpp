#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "isqn/mdp.hpp"
#include "isqn/meta.hpp"
#include "isqn/offline.hpp"
#include "isqn/qnet.hpp"
#include "isqn/records.hpp"
#include "isqn/train_config.hpp"

namespace isqn {

class Rng;

/// Heads that may choose actions: 1..K for iS, the online head of every ES
/// pair, and head 0 for TB and TF.
std::vector<std::size_t> acting_heads(const MultiHeadQNet& net);

/// Draws u uniformly from the acting heads, then acts ε-greedily on Q_u.
/// Ties go to the lowest action index.
std::size_t select_action(const MultiHeadQNet& net, std::span<const double> state, double epsilon,
                          Rng& rng);

/// S×A policy that picks each acting head with equal probability and then
/// acts greedily with it.
Matrix mixture_greedy_policy(const MultiHeadQNet& net, const FeatureEncoder& encoder);

struct GradientEvent {
  std::size_t gradient_step = 0;
  double loss = 0.0;
  /// A target update (shift, sync) followed this step.
  bool target_updated = false;
};

struct TrainHooks {
  /// Runs after every optimizer step, before any target update of that step.
  std::function<void(const MultiHeadQNet&, const GradientEvent&)> after_gradient_step;
  /// Runs just before each target update.
  std::function<void(const MultiHeadQNet&, std::size_t gradient_step)> before_target_update;
};

struct TrainStats {
  std::size_t env_steps = 0;
  std::size_t gradient_steps = 0;
  std::size_t target_updates = 0;
  std::size_t episodes = 0;
};

struct TrainResult {
  MultiHeadQNet net;
  std::vector<MetricsRow> rows;
  TrainStats stats;
  std::optional<MetaCoefficients> meta;
  bool diverged = false;
  std::string message;
};

/// Online loop: act, store, learn every G steps, update targets every T
/// gradient steps, and emit one row every epoch_steps environment steps.
TrainResult train_online(const TabularMdp& mdp, const FeatureEncoder& encoder, TrainConfig config,
                         const TrainHooks& hooks = {});

/// Offline loop over a fixed dataset. Rows are emitted every epoch_steps
/// gradient steps and returns are always estimated exactly on `mdp`.
TrainResult train_offline(const TabularMdp& mdp, const OfflineDataset& dataset,
                          const FeatureEncoder& encoder, TrainConfig config,
                          const TrainHooks& hooks = {});

}  // namespace isqn
