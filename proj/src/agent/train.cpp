#include "isqn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "isqn/diagnostics.hpp"
#include "isqn/errors.hpp"
#include "isqn/replay.hpp"
#include "isqn/rng.hpp"

namespace isqn {

std::vector<std::size_t> acting_heads(const MultiHeadQNet& net) { return net.learned_heads(); }

std::size_t select_action(const MultiHeadQNet& net, std::span<const double> state, double epsilon,
                          Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
  const std::vector<std::size_t> heads = acting_heads(net);
  const std::size_t u = heads[rng.below(heads.size())];
  if (rng.uniform() < epsilon) return rng.below(net.n_actions());
  Matrix s(1, state.size(), std::vector<double>(state.begin(), state.end()));
  const Matrix q = net.q_head(s, u);
  return greedy_actions(q)[0];
}

Matrix mixture_greedy_policy(const MultiHeadQNet& net, const FeatureEncoder& encoder) {
  const std::vector<std::size_t> heads = acting_heads(net);
  const Matrix features = net.features(encoder.table());
  Matrix policy(encoder.n_states(), net.n_actions());
  const double share = 1.0 / static_cast<double>(heads.size());
  for (std::size_t u : heads) {
    const auto best = greedy_actions(net.apply_head(features, u, net.params()));
    for (std::size_t s = 0; s < best.size(); ++s) policy(s, best[s]) += share;
  }
  return policy;
}

namespace {

struct EpochAccumulator {
  double loss = 0.0, churn = 0.0, cos_tb = 0.0, cos_tf = 0.0;
  std::size_t loss_n = 0, churn_n = 0, cos_n = 0;
};

std::optional<double> mean_of(double sum, std::size_t n) {
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

/// Gradient steps, target updates and per-step diagnostics shared by the
/// online and offline loops.
class Learner {
 public:
  Learner(const TrainConfig& config, MultiHeadQNet& net, const TrainHooks& hooks)
      : config_(config), net_(net), hooks_(hooks), shadow_(net.params()) {
    if (config_.optimizer == OptimizerKind::Adam) adam_.emplace(net_.params(), config_.adam);
    if (config_.loss.weighting == Weighting::Meta) {
      meta_.emplace(link_count(net_), config_.meta_lr);
    }
    if (config_.freeze_torso) {
      for (ParamId id : net_.torso_param_ids()) net_.params().set_frozen(id, true);
    }
  }

  std::size_t gradient_steps() const { return steps_; }
  std::size_t target_updates() const { return target_updates_; }
  const std::optional<MetaCoefficients>& meta() const { return meta_; }

  void step(const Batch& batch) {
    std::optional<MultiHeadQNet> before;
    if (config_.diagnostics.churn) before.emplace(net_);

    LossGraph graph(net_, batch, config_.loss);
    const MetaCoefficients* coeffs = meta_ ? &*meta_ : nullptr;
    const NodeId loss = training_loss(graph, coeffs);
    const double loss_value = graph.value(loss);
    if (!std::isfinite(loss_value)) throw NumericError("training loss is not finite");
    Gradients grads = graph.gradients(loss);

    const bool cosine_window =
        config_.diagnostics.cosine_steps == 0 || steps_ < config_.diagnostics.cosine_steps;
    if (config_.diagnostics.cosines && cosine_window) record_cosines(graph, grads);

    if (meta_) {
      meta_update(*meta_, net_, batch, config_.loss, config_.sgd_lr, config_.optimizer);
    }
    if (adam_) {
      adam_step(*adam_, net_.params(), grads);
    } else {
      sgd_step(net_.params(), grads, config_.sgd_lr);
    }
    ++steps_;
    epoch_.loss += loss_value;
    ++epoch_.loss_n;

    if (before) {
      const double churn = target_churn(*before, net_, batch, config_.loss,
                                        config_.diagnostics.churn_target);
      epoch_.churn += churn;
      ++epoch_.churn_n;
    }

    const bool update = steps_ % config_.T == 0;
    if (hooks_.after_gradient_step) hooks_.after_gradient_step(net_, {steps_, loss_value, update});
    if (update) {
      if (hooks_.before_target_update) hooks_.before_target_update(net_, steps_);
      net_.target_update();
      shadow_.assign_values(net_.params());
      ++target_updates_;
    }
  }

  /// Per-epoch means of the step diagnostics; clears them for the next epoch.
  void fill_row(MetricsRow& row) {
    row.loss = mean_of(epoch_.loss, epoch_.loss_n);
    row.churn = mean_of(epoch_.churn, epoch_.churn_n);
    row.cos_tb = mean_of(epoch_.cos_tb, epoch_.cos_n);
    row.cos_tf = mean_of(epoch_.cos_tf, epoch_.cos_n);
    epoch_ = {};
  }

 private:
  void record_cosines(LossGraph& graph, const Gradients& train) {
    const std::size_t slot = link_online_head(net_, 1);
    const NodeId tb = graph.td_between(slot, graph.bootstrap_target(graph.q_next_from(shadow_, slot)));
    const NodeId tf = graph.td_between(slot, graph.bootstrap_target(graph.q_next(slot)));
    std::vector<ParamId> ids = net_.torso_param_ids();
    for (ParamId id : net_.head_param_ids(slot)) ids.push_back(id);
    const auto g_train = flatten(train, ids);
    const auto g_tb = flatten(graph.gradients(tb), ids);
    const auto g_tf = flatten(graph.gradients(tf), ids);
    epoch_.cos_tb += grad_cosine(g_train, g_tb);
    epoch_.cos_tf += grad_cosine(g_tf, g_tb);
    ++epoch_.cos_n;
  }

  const TrainConfig& config_;
  MultiHeadQNet& net_;
  const TrainHooks& hooks_;
  ParamSet shadow_;
  std::optional<AdamState> adam_;
  std::optional<MetaCoefficients> meta_;
  std::size_t steps_ = 0;
  std::size_t target_updates_ = 0;
  EpochAccumulator epoch_;
};

void complete_net_config(TrainConfig& config, const TabularMdp& mdp, const FeatureEncoder& encoder) {
  if (encoder.n_states() != mdp.n_states()) {
    throw ConfigError("encoder covers " + std::to_string(encoder.n_states()) + " states, MDP has " +
                      std::to_string(mdp.n_states()));
  }
  if (config.net.input_dim == 0) config.net.input_dim = encoder.dim();
  if (config.net.n_actions == 0) config.net.n_actions = mdp.n_actions();
  if (config.net.input_dim != encoder.dim()) throw ConfigError("network input width differs from the encoder");
  if (config.net.n_actions != mdp.n_actions()) throw ConfigError("network action count differs from the MDP");
  config.validate();
}

void fill_static(MetricsRow& row, const MultiHeadQNet& net, const Normalizer& normalizer,
                 double ret) {
  row.ret = ret;
  row.norm_return = normalizer.normalize(ret);
  const ParamCounts counts = param_count(net);
  row.params_online = counts.online_total;
  row.params_total = counts.grand_total;
}

void fill_features(MetricsRow& row, const TrainConfig& config, const MultiHeadQNet& net,
                   const Matrix& probe) {
  if (!config.diagnostics.features) return;
  std::vector<Matrix> acts;
  const Matrix features = net.features(probe, &acts);
  row.srank = srank(features, config.diagnostics.srank_delta).rank;
  row.dormant = dormant_fraction(acts, config.diagnostics.dormant_tau);
}

double greedy_return(const TabularMdp& mdp, const FeatureEncoder& encoder, const MultiHeadQNet& net,
                     std::size_t horizon) {
  return policy_return(mdp, mixture_greedy_policy(net, encoder), horizon);
}

}  // namespace

TrainResult train_online(const TabularMdp& mdp, const FeatureEncoder& encoder, TrainConfig config,
                         const TrainHooks& hooks) {
  complete_net_config(config, mdp, encoder);
  if (config.returns == ReturnEstimate::Episodes && config.epoch_steps < config.horizon) {
    throw ConfigError("episode returns need epochs at least as long as the horizon");
  }
  Rng init_rng = Rng::stream(config.seed, "init");
  Rng action_rng = Rng::stream(config.seed, "action");
  Rng env_rng = Rng::stream(config.seed, "env");
  Rng buffer_rng = Rng::stream(config.seed, "buffer");
  Rng warmup_rng = Rng::stream(config.seed, "warmup");
  Rng metrics_rng = Rng::stream(config.seed, "metrics");

  TrainResult result{MultiHeadQNet(config.net, init_rng), {}, {}, std::nullopt, false, ""};
  MultiHeadQNet& net = result.net;
  const Normalizer normalizer = make_normalizer(mdp, config.horizon);
  ReplayBuffer buffer(config.buffer_capacity, encoder.dim());
  Learner learner(config, net, hooks);

  std::size_t state = mdp.sample_initial(warmup_rng);
  std::size_t t = 0;
  for (std::size_t i = 0; i < config.warmup; ++i) {
    const std::size_t a = warmup_rng.below(mdp.n_actions());
    const StepResult r = step(mdp, state, a, env_rng);
    buffer.add(encoder.row(state), a, r.reward, encoder.row(r.next_state), r.done);
    state = r.next_state;
    if (r.done || ++t >= config.horizon) {
      state = mdp.sample_initial(warmup_rng);
      t = 0;
    }
  }

  state = mdp.sample_initial(env_rng);
  t = 0;
  double episode_return = 0.0;
  double epoch_returns = 0.0;
  std::size_t epoch_episodes = 0;
  std::size_t epoch = 0;
  auto emit = [&] {
    MetricsRow row;
    row.epoch = ++epoch;
    double ret = 0.0;
    if (config.returns == ReturnEstimate::Greedy) {
      ret = greedy_return(mdp, encoder, net, config.horizon);
    } else {
      ret = epoch_episodes ? epoch_returns / static_cast<double>(epoch_episodes) : episode_return;
    }
    fill_static(row, net, normalizer, ret);
    learner.fill_row(row);
    if (config.diagnostics.features) {
      fill_features(row, config, net, buffer.sample(config.diagnostics.probe_size, metrics_rng).states);
    }
    result.rows.push_back(row);
    epoch_returns = 0.0;
    epoch_episodes = 0;
  };

  try {
    for (std::size_t n = 0; n < config.total_steps; ++n) {
      const double eps = config.epsilon.at(n);
      const std::size_t a = select_action(net, encoder.row(state), eps, action_rng);
      const StepResult r = step(mdp, state, a, env_rng);
      buffer.add(encoder.row(state), a, r.reward, encoder.row(r.next_state), r.done);
      episode_return += r.reward;
      state = r.next_state;
      ++result.stats.env_steps;
      if (r.done || ++t >= config.horizon) {
        epoch_returns += episode_return;
        ++epoch_episodes;
        ++result.stats.episodes;
        episode_return = 0.0;
        state = mdp.sample_initial(env_rng);
        t = 0;
      }
      if ((n + 1) % config.G == 0) learner.step(buffer.sample(config.batch_size, buffer_rng));
      if ((n + 1) % config.epoch_steps == 0 || n + 1 == config.total_steps) emit();
    }
  } catch (const NumericError& e) {
    result.diverged = true;
    result.message = e.what();
    MetricsRow row;
    row.epoch = ++epoch;
    fill_static(row, net, normalizer, epoch_episodes ? epoch_returns / epoch_episodes : episode_return);
    learner.fill_row(row);
    row.loss.reset();
    result.rows.push_back(row);
  }
  result.stats.gradient_steps = learner.gradient_steps();
  result.stats.target_updates = learner.target_updates();
  result.meta = learner.meta();
  return result;
}

TrainResult train_offline(const TabularMdp& mdp, const OfflineDataset& dataset,
                          const FeatureEncoder& encoder, TrainConfig config,
                          const TrainHooks& hooks) {
  complete_net_config(config, mdp, encoder);
  if (dataset.transitions.empty()) throw ConfigError("offline dataset is empty");
  dataset.validate(mdp);
  Rng init_rng = Rng::stream(config.seed, "init");
  Rng buffer_rng = Rng::stream(config.seed, "buffer");
  Rng metrics_rng = Rng::stream(config.seed, "metrics");

  TrainResult result{MultiHeadQNet(config.net, init_rng), {}, {}, std::nullopt, false, ""};
  MultiHeadQNet& net = result.net;
  const Normalizer normalizer = make_normalizer(mdp, config.horizon);
  ReplayBuffer buffer(dataset.transitions.size(), encoder.dim());
  for (const TabularTransition& tr : dataset.transitions) {
    buffer.add(encoder.row(tr.state), tr.action, tr.reward, encoder.row(tr.next_state), tr.done);
  }
  Learner learner(config, net, hooks);
  std::size_t epoch = 0;
  auto emit = [&] {
    MetricsRow row;
    row.epoch = ++epoch;
    fill_static(row, net, normalizer, greedy_return(mdp, encoder, net, config.horizon));
    learner.fill_row(row);
    if (config.diagnostics.features) {
      fill_features(row, config, net, buffer.sample(config.diagnostics.probe_size, metrics_rng).states);
    }
    result.rows.push_back(row);
  };
  try {
    for (std::size_t n = 0; n < config.total_steps; ++n) {
      learner.step(buffer.sample(config.batch_size, buffer_rng));
      if ((n + 1) % config.epoch_steps == 0 || n + 1 == config.total_steps) emit();
    }
  } catch (const NumericError& e) {
    result.diverged = true;
    result.message = e.what();
    MetricsRow row;
    row.epoch = ++epoch;
    learner.fill_row(row);
    row.loss.reset();
    double ret = 0.0;
    try {
      ret = greedy_return(mdp, encoder, net, config.horizon);
    } catch (const NumericError&) {
    }
    fill_static(row, net, normalizer, ret);
    result.rows.push_back(row);
  }
  result.stats.gradient_steps = learner.gradient_steps();
  result.stats.target_updates = learner.target_updates();
  result.meta = learner.meta();
  return result;
}

}  // namespace isqn
