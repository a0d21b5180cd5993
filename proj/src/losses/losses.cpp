#include "isqn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "isqn/errors.hpp"
#include "isqn/meta.hpp"

namespace isqn {

void LossConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  if (!(discount_factor > 0.0 && discount_factor <= 1.0)) {
    throw ConfigError("discount factor must lie in (0, 1]");
  }
  if (backup == BackupOperator::MellowMax && !(mellowmax_omega > 0.0)) {
    throw ConfigError("mellowmax omega must be positive");
  }
  if (!(conservative_alpha >= 0.0) || !std::isfinite(conservative_alpha)) {
    throw ConfigError("conservative alpha must be a finite non-negative number");
  }
}

void Batch::validate(std::size_t state_dim, std::size_t n_actions) const {
  const std::size_t n = size();
  if (n == 0) throw ConfigError("batch is empty");
  if (states.rows() != n || next_states.rows() != n || rewards.size() != n || dones.size() != n) {
    throw ConfigError("batch fields disagree on the number of transitions");
  }
  if (states.cols() != state_dim || next_states.cols() != state_dim) {
    throw ConfigError("batch state width " + std::to_string(states.cols()) +
                      " does not match network input " + std::to_string(state_dim));
  }
  for (std::size_t b = 0; b < n; ++b) {
    if (actions[b] >= n_actions) throw ConfigError("batch action out of range");
    if (!std::isfinite(rewards[b])) throw NumericError("batch reward is not finite");
    if (dones[b] != 0.0 && dones[b] != 1.0) throw ConfigError("batch done flags must be 0 or 1");
  }
}

LossGraph::LossGraph(const MultiHeadQNet& net, const Batch& batch, const LossConfig& config)
    : net_(net), batch_(batch), config_(config) {
  config_.validate();
  batch_.validate(net_.config().input_dim, net_.n_actions());
}

NodeId LossGraph::online_features() {
  if (!online_features_) {
    NodeId input = tape_.constant(batch_.states);
    online_features_ = net_.torso_on_tape(tape_, input, net_.params(), &online_acts_);
  }
  return *online_features_;
}

NodeId LossGraph::next_features(const ParamSet& source) {
  auto it = next_features_.find(&source);
  if (it != next_features_.end()) return it->second;
  NodeId input = tape_.constant(batch_.next_states);
  NodeId feats = tape_.stop_gradient(net_.torso_on_tape(tape_, input, source));
  next_features_.emplace(&source, feats);
  return feats;
}

NodeId LossGraph::q_online(std::size_t head) {
  auto it = q_online_.find(head);
  if (it != q_online_.end()) return it->second;
  NodeId q = net_.head_on_tape(tape_, online_features(), head, net_.params());
  q_online_.emplace(head, q);
  return q;
}

NodeId LossGraph::q_next(std::size_t head) { return q_next_from(net_.params(), head); }

NodeId LossGraph::q_next_from(const ParamSet& source, std::size_t head) {
  auto key = std::make_pair(&source, head);
  auto it = q_next_.find(key);
  if (it != q_next_.end()) return it->second;
  NodeId q = tape_.stop_gradient(net_.head_on_tape(tape_, next_features(source), head, source));
  q_next_.emplace(key, q);
  return q;
}

NodeId LossGraph::bootstrap_target(NodeId q_next_node) {
  NodeId backed = config_.backup == BackupOperator::MellowMax
                      ? tape_.mellowmax_row(q_next_node, config_.mellowmax_omega)
                      : tape_.max_row(q_next_node);
  const std::size_t n = batch_.size();
  Matrix factor(n, 1);
  Matrix offset(n, 1);
  for (std::size_t b = 0; b < n; ++b) {
    factor(b, 0) = config_.gamma * (1.0 - batch_.dones[b]);
    offset(b, 0) = batch_.rewards[b];
  }
  return tape_.stop_gradient(tape_.affine_const(backed, std::move(factor), std::move(offset)));
}

NodeId LossGraph::td_between(std::size_t online_head, NodeId target) {
  NodeId taken = tape_.gather(q_online(online_head), batch_.actions);
  return tape_.mean(tape_.square(tape_.sub(target, taken)));
}

std::size_t link_count(const MultiHeadQNet& net) {
  switch (net.mode()) {
    case NetMode::IteratedShared:
      return net.config().K;
    case NetMode::EnsembleShared:
      return net.config().pairs;
    case NetMode::TargetBased:
    case NetMode::TargetFree:
      return 1;
  }
  return 0;
}

namespace {

void require_link(const MultiHeadQNet& net, std::size_t k) {
  if (k == 0) throw UsageError("link 0 is the frozen chain root and is never learned");
  if (k > link_count(net)) {
    throw UsageError("link " + std::to_string(k) + " exceeds the " +
                     std::to_string(link_count(net)) + " links of this network");
  }
}

}  // namespace

std::size_t link_online_head(const MultiHeadQNet& net, std::size_t k) {
  require_link(net, k);
  switch (net.mode()) {
    case NetMode::IteratedShared:
      return k;
    case NetMode::EnsembleShared:
      return 2 * k - 1;
    default:
      return 0;
  }
}

NodeId regression_target(LossGraph& graph, std::size_t k) {
  const MultiHeadQNet& net = graph.net();
  require_link(net, k);
  switch (net.mode()) {
    case NetMode::IteratedShared:
      return graph.bootstrap_target(graph.q_next(k - 1));
    case NetMode::EnsembleShared:
      return graph.bootstrap_target(graph.q_next(2 * k - 2));
    case NetMode::TargetFree:
      return graph.bootstrap_target(graph.q_next(0));
    case NetMode::TargetBased:
      return graph.bootstrap_target(graph.q_next_from(*net.target_params(), 0));
  }
  throw UsageError("unknown network mode");
}

NodeId td_term(LossGraph& graph, std::size_t k) {
  NodeId target = regression_target(graph, k);
  return graph.td_between(link_online_head(graph.net(), k), target);
}

NodeId conservative_penalty(LossGraph& graph, std::size_t k, double alpha) {
  if (!(alpha >= 0.0)) throw ConfigError("conservative alpha must be non-negative");
  Tape& tape = graph.tape();
  NodeId q = graph.q_online(link_online_head(graph.net(), k));
  NodeId gap = tape.sub(tape.logsumexp_row(q), tape.gather(q, graph.batch().actions));
  return tape.scale(tape.mean(gap), alpha);
}

NodeId link_loss(LossGraph& graph, std::size_t k) {
  NodeId term = td_term(graph, k);
  const double alpha = graph.config().conservative_alpha;
  if (alpha == 0.0) return term;
  return graph.tape().add(term, conservative_penalty(graph, k, alpha));
}

std::vector<double> link_weights(const LossConfig& config, std::size_t links,
                                 const MetaCoefficients* coeffs) {
  const bool meta = config.weighting == Weighting::Meta;
  if (meta && coeffs == nullptr) throw ConfigError("meta weighting requires coefficients");
  if (!meta && coeffs != nullptr) {
    throw ConfigError("coefficients are only accepted with meta weighting");
  }
  std::vector<double> w(links, 1.0);
  if (config.weighting == Weighting::Discounted) {
    double c = 1.0;
    for (std::size_t k = 0; k < links; ++k, c *= config.discount_factor) w[k] = c;
  } else if (meta) {
    if (coeffs->size() != links) {
      throw ConfigError("meta coefficient count " + std::to_string(coeffs->size()) +
                        " does not match " + std::to_string(links) + " links");
    }
    w = coeffs->alphas();
  }
  return w;
}

NodeId isqn_loss(LossGraph& graph, const MetaCoefficients* coeffs) {
  if (graph.net().mode() == NetMode::EnsembleShared) {
    throw UsageError("ensemble networks are trained with ensemble_loss");
  }
  const std::size_t links = link_count(graph.net());
  const std::vector<double> w = link_weights(graph.config(), links, coeffs);
  Tape& tape = graph.tape();
  NodeId total = 0;
  for (std::size_t k = 1; k <= links; ++k) {
    NodeId term = link_loss(graph, k);
    if (w[k - 1] != 1.0) term = tape.scale(term, w[k - 1]);
    total = k == 1 ? term : tape.add(total, term);
  }
  return total;
}

NodeId ensemble_loss(LossGraph& graph) {
  const MultiHeadQNet& net = graph.net();
  if (net.mode() != NetMode::EnsembleShared) {
    throw UsageError("ensemble_loss requires an ensemble network");
  }
  if (net.num_heads() % 2 != 0) {
    throw ConfigError("ensemble networks need an even head count, got " +
                      std::to_string(net.num_heads()));
  }
  Tape& tape = graph.tape();
  NodeId total = 0;
  for (std::size_t p = 1; p <= net.config().pairs; ++p) {
    NodeId term = link_loss(graph, p);
    total = p == 1 ? term : tape.add(total, term);
  }
  return total;
}

NodeId training_loss(LossGraph& graph, const MetaCoefficients* coeffs) {
  if (graph.net().mode() == NetMode::EnsembleShared) {
    if (coeffs != nullptr) throw ConfigError("meta weighting is not available for ensembles");
    return ensemble_loss(graph);
  }
  return isqn_loss(graph, coeffs);
}

Matrix regression_targets(const MultiHeadQNet& net, const Batch& batch, const LossConfig& config,
                          std::size_t k) {
  LossGraph graph(net, batch, config);
  return graph.tape().value(regression_target(graph, k));
}

double mellowmax(std::span<const double> q, double omega) {
  if (q.empty()) throw ConfigError("mellowmax of an empty vector");
  if (!(omega > 0.0)) throw ConfigError("mellowmax omega must be positive");
  const double top = *std::max_element(q.begin(), q.end());
  double acc = 0.0;
  for (double v : q) acc += std::exp(omega * (v - top));
  return top + std::log(acc / static_cast<double>(q.size())) / omega;
}

}  // namespace isqn
