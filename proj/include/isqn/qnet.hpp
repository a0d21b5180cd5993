#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "isqn/matrix.hpp"
#include "isqn/mlp.hpp"
#include "isqn/params.hpp"
#include "isqn/tape.hpp"

namespace isqn {

class Rng;

/// How the regression target is built.
///  - TargetBased: one head, plus a full frozen copy of torso and head.
///  - TargetFree: one head, target read from the online network itself.
///  - IteratedShared: K+1 heads on one torso; head k regresses onto head k−1.
///  - EnsembleShared: P (frozen, online) head pairs on one torso.
enum class NetMode { TargetBased, TargetFree, IteratedShared, EnsembleShared };

std::string_view to_string(NetMode mode);
/// Accepts "TB", "TF", "iS", "ES" and the long enum names (case-insensitive).
NetMode parse_net_mode(std::string_view text);

struct NetConfig {
  std::size_t input_dim = 0;
  /// Hidden widths of the torso. Empty means the torso is the identity and
  /// the heads read the raw input (tabular heads on one-hot inputs).
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t n_actions = 0;
  bool layernorm = true;
  NetMode mode = NetMode::IteratedShared;
  /// Chain length for IteratedShared (≥ 1).
  std::size_t K = 1;
  /// Number of (frozen, online) pairs for EnsembleShared (≥ 1).
  std::size_t pairs = 1;

  void validate() const;
  std::size_t feature_dim() const { return hidden.empty() ? input_dim : hidden.back(); }
  std::size_t head_count() const;
};

struct HeadLayer {
  ParamId weight = 0;  // feature_dim × n_actions
  ParamId bias = 0;    // 1 × n_actions
};

/// Shared torso ω feeding linear heads ω_0..ω_H−1. θ_k = (ω, ω_k) is never
/// materialized: every head reads the same torso arrays.
class MultiHeadQNet {
 public:
  MultiHeadQNet(NetConfig config, Rng& init_rng);

  const NetConfig& config() const { return config_; }
  NetMode mode() const { return config_.mode; }
  std::size_t num_heads() const { return heads_.size(); }
  std::size_t n_actions() const { return config_.n_actions; }
  std::size_t feature_dim() const { return config_.feature_dim(); }

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  /// Frozen copy θ̄ (TargetBased only, otherwise null).
  const ParamSet* target_params() const { return target_ ? &*target_ : nullptr; }

  std::span<const DenseLayer> torso() const { return torso_; }
  const HeadLayer& head(std::size_t k) const { return heads_.at(k); }
  std::vector<ParamId> torso_param_ids() const;
  std::vector<ParamId> head_param_ids(std::size_t k) const;

  /// Records the torso on `tape` with weights read from `source`, which must
  /// share this network's layout (the online set or θ̄).
  NodeId torso_on_tape(Tape& tape, NodeId input, const ParamSet& source,
                       std::vector<NodeId>* activations = nullptr) const;
  NodeId head_on_tape(Tape& tape, NodeId features, std::size_t k, const ParamSet& source) const;

  Matrix features(const Matrix& states, std::vector<Matrix>* activations = nullptr) const;
  Matrix apply_head(const Matrix& features, std::size_t k, const ParamSet& source) const;
  /// [Q_0(s,·), .., Q_H−1(s,·)] from a single torso pass.
  std::vector<Matrix> q_all_heads(const Matrix& states) const;
  Matrix q_head(const Matrix& states, std::size_t k) const;
  /// Q-values of the frozen copy (TargetBased only).
  Matrix q_target(const Matrix& states) const;

  /// ω_k ← ω_{k+1} for k < K (IteratedShared only).
  void shift_heads();
  /// θ̄ ← θ (TargetBased only).
  void sync_target();
  /// frozen_p ← online_p for every pair (EnsembleShared only).
  void sync_ensemble();
  /// Mode-appropriate periodic update; no-op for TargetFree.
  void target_update();

  /// Heads that receive gradient and may act (1..K for iS, odd slots for ES).
  std::vector<std::size_t> learned_heads() const;

 private:
  NetConfig config_;
  ParamSet params_;
  std::vector<DenseLayer> torso_;
  std::vector<HeadLayer> heads_;
  std::optional<ParamSet> target_;
};

struct ParamCounts {
  std::size_t online_total = 0;
  std::size_t target_extra = 0;
  std::size_t grand_total = 0;
};

/// Counts by enumerating the stored arrays.
ParamCounts param_count(const MultiHeadQNet& net);
/// Closed form from torso and single-head sizes:
/// TF |ω|+|h|, TB 2(|ω|+|h|), iS |ω|+(K+1)|h|, ES |ω|+2P|h|.
ParamCounts param_count_closed_form(NetMode mode, std::size_t torso_size, std::size_t head_size,
                                    std::size_t K, std::size_t pairs);

}  // namespace isqn
