#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "isqn/matrix.hpp"
#include "isqn/qnet.hpp"
#include "isqn/tape.hpp"

namespace isqn {

class MetaCoefficients;

enum class Weighting { Uniform, Discounted, Meta };
enum class BackupOperator { Max, MellowMax };

struct LossConfig {
  double gamma = 0.99;
  Weighting weighting = Weighting::Uniform;
  /// Term k is scaled by discount_factor^(k−1) under Weighting::Discounted.
  double discount_factor = 0.25;
  BackupOperator backup = BackupOperator::Max;
  double mellowmax_omega = 30.0;
  /// Weight of the CQL(H) penalty; 0 disables it.
  double conservative_alpha = 0.0;

  void validate() const;
};

/// A minibatch of transitions with states already encoded as features.
struct Batch {
  Matrix states;
  Matrix next_states;
  std::vector<std::size_t> actions;
  std::vector<double> rewards;
  /// 1.0 for terminal transitions, 0.0 otherwise (timeouts stay 0).
  std::vector<double> dones;

  std::size_t size() const { return actions.size(); }
  void validate(std::size_t state_dim, std::size_t n_actions) const;
};

/// Shared tape for every loss built on one (network, batch) pair.
///
/// The torso runs once on s (differentiable) and once on s′ (behind a
/// stop-gradient), and each head output is recorded at most once, so the K
/// terms of the iterated loss share a single forward pass per input.
class LossGraph {
 public:
  LossGraph(const MultiHeadQNet& net, const Batch& batch, const LossConfig& config);

  Tape& tape() { return tape_; }
  const Tape& tape() const { return tape_; }
  const MultiHeadQNet& net() const { return net_; }
  const Batch& batch() const { return batch_; }
  const LossConfig& config() const { return config_; }

  /// Q_head(s,·), differentiable w.r.t. the online parameters.
  NodeId q_online(std::size_t head);
  /// ⌈Q_head(s′,·)⌉ evaluated with `source` weights (online set by default).
  NodeId q_next(std::size_t head);
  NodeId q_next_from(const ParamSet& source, std::size_t head);
  /// ⌈r + γ(1−done)·op_a′ q_next(s′,a′)⌉ as a batch×1 node.
  NodeId bootstrap_target(NodeId q_next_node);
  /// mean_b (y_b − Q_head(s_b, a_b))².
  NodeId td_between(std::size_t online_head, NodeId target);

  /// Hidden activations of the torso on s (available after q_online).
  const std::vector<NodeId>& online_activations() const { return online_acts_; }

  double value(NodeId node) const { return tape_.scalar(node); }
  Gradients gradients(NodeId loss) const { return tape_.backward(loss, net_.params()); }

 private:
  NodeId online_features();
  NodeId next_features(const ParamSet& source);

  const MultiHeadQNet& net_;
  const Batch& batch_;
  LossConfig config_;
  Tape tape_;
  std::optional<NodeId> online_features_;
  std::vector<NodeId> online_acts_;
  std::map<const ParamSet*, NodeId> next_features_;
  std::map<std::size_t, NodeId> q_online_;
  std::map<std::pair<const ParamSet*, std::size_t>, NodeId> q_next_;
};

/// Number of learned links: K for iS, P for ES, 1 for TB and TF.
std::size_t link_count(const MultiHeadQNet& net);
/// Head regressed by link k (1-based).
std::size_t link_online_head(const MultiHeadQNet& net, std::size_t k);

/// Regression target of link k (1-based):
///   iS: head k−1 of the online network; ES: frozen head of pair k;
///   TF: the online head itself; TB: the frozen copy θ̄.
NodeId regression_target(LossGraph& graph, std::size_t k);
/// The DQN term of link k. k = 0 is a usage error: ω_0 is never learned.
NodeId td_term(LossGraph& graph, std::size_t k);
/// α·mean_b [logsumexp_a Q(s_b,a) − Q(s_b,a_b)] for the head of link k.
NodeId conservative_penalty(LossGraph& graph, std::size_t k, double alpha);
/// td_term plus the conservative penalty when it is enabled.
NodeId link_loss(LossGraph& graph, std::size_t k);

/// Coefficient of each link under the configured weighting.
std::vector<double> link_weights(const LossConfig& config, std::size_t links,
                                 const MetaCoefficients* coeffs);

/// Σ_k w_k·link_k for TB, TF and iS networks. `coeffs` is required exactly
/// when the weighting is Meta.
NodeId isqn_loss(LossGraph& graph, const MetaCoefficients* coeffs = nullptr);
/// Σ_p link_p over the pairs of an ES network.
NodeId ensemble_loss(LossGraph& graph);
/// The objective a training step minimizes for the network's mode.
NodeId training_loss(LossGraph& graph, const MetaCoefficients* coeffs = nullptr);

/// Regression targets of link k as a batch×1 matrix (tape-free convenience).
Matrix regression_targets(const MultiHeadQNet& net, const Batch& batch, const LossConfig& config,
                          std::size_t k);

/// (1/ω)·ln((1/n)·Σ exp(ω·q_i)), evaluated with the max subtracted.
double mellowmax(std::span<const double> q, double omega);

}  // namespace isqn
