#pragma once

#include <cstddef>
#include <cstdint>

#include "isqn/diagnostics.hpp"
#include "isqn/losses.hpp"
#include "isqn/optim.hpp"
#include "isqn/qnet.hpp"

namespace isqn {

/// Linear decay from `start` to `end` over `decay_steps` environment steps.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.01;
  std::size_t decay_steps = 5000;

  double at(std::size_t step) const;
};

enum class ReturnEstimate {
  /// Mean undiscounted return of the training episodes that ended in the epoch.
  Episodes,
  /// Exact finite-horizon return of the greedy policy, averaged over acting heads.
  Greedy,
};

struct DiagnosticsConfig {
  bool churn = false;
  ChurnTarget churn_target = ChurnTarget::Freshest;
  /// Gradient cosines against shadow TB and TF objectives.
  bool cosines = false;
  /// Cosines are only computed during the first `cosine_steps` gradient
  /// steps (0 means always).
  std::size_t cosine_steps = 0;
  /// srank and dormant fraction on a probe batch at the end of every epoch.
  bool features = false;
  std::size_t probe_size = 256;
  double srank_delta = 0.01;
  double dormant_tau = 0.025;
};

struct TrainConfig {
  /// input_dim and n_actions are filled from the environment when left at 0.
  NetConfig net;
  /// Target update period in gradient steps: head shift, target sync or pair sync.
  std::size_t T = 100;
  /// Environment steps per gradient step.
  std::size_t G = 1;
  std::size_t batch_size = 32;
  std::size_t buffer_capacity = 10000;
  /// Uniform-random transitions stored before training starts.
  std::size_t warmup = 500;
  /// Environment steps online, gradient steps offline.
  std::size_t total_steps = 20000;
  /// Steps per MetricsRow, in the same unit as total_steps.
  std::size_t epoch_steps = 1000;
  std::size_t horizon = 200;
  EpsilonSchedule epsilon;
  OptimizerKind optimizer = OptimizerKind::Adam;
  AdamConfig adam;
  double sgd_lr = 0.1;
  double meta_lr = 0.1;
  LossConfig loss;
  /// Keeps the torso at its initial weights; only heads learn.
  bool freeze_torso = false;
  ReturnEstimate returns = ReturnEstimate::Episodes;
  DiagnosticsConfig diagnostics;
  std::uint64_t seed = 0;

  void validate() const;
  /// SGD learning rate or Adam step size, whichever the optimizer uses.
  double learning_rate() const;
};

}  // namespace isqn
