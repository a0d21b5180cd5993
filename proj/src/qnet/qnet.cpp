#include "isqn/qnet.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "isqn/errors.hpp"
#include "isqn/rng.hpp"

namespace isqn {

std::string_view to_string(NetMode mode) {
  switch (mode) {
    case NetMode::TargetBased: return "TB";
    case NetMode::TargetFree: return "TF";
    case NetMode::IteratedShared: return "iS";
    case NetMode::EnsembleShared: return "ES";
  }
  return "?";
}

NetMode parse_net_mode(std::string_view text) {
  std::string t(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "tb" || t == "targetbased") return NetMode::TargetBased;
  if (t == "tf" || t == "targetfree") return NetMode::TargetFree;
  if (t == "is" || t == "iteratedshared") return NetMode::IteratedShared;
  if (t == "es" || t == "ensembleshared") return NetMode::EnsembleShared;
  throw ConfigError("unknown network mode '" + std::string(text) + "' (expected TB, TF, iS or ES)");
}

void NetConfig::validate() const {
  if (input_dim == 0) throw ConfigError("input_dim must be positive");
  if (n_actions == 0) throw ConfigError("n_actions must be positive");
  for (std::size_t w : hidden)
    if (w == 0) throw ConfigError("hidden widths must be positive");
  if (mode == NetMode::IteratedShared && K < 1) throw ConfigError("K must be >= 1");
  if (mode == NetMode::EnsembleShared && pairs < 1) throw ConfigError("pairs must be >= 1");
}

std::size_t NetConfig::head_count() const {
  switch (mode) {
    case NetMode::TargetBased:
    case NetMode::TargetFree: return 1;
    case NetMode::IteratedShared: return K + 1;
    case NetMode::EnsembleShared: return 2 * pairs;
  }
  return 0;
}

MultiHeadQNet::MultiHeadQNet(NetConfig config, Rng& init_rng) : config_(std::move(config)) {
  config_.validate();
  std::size_t in = config_.input_dim;
  for (std::size_t i = 0; i < config_.hidden.size(); ++i) {
    torso_.push_back(make_dense_layer(params_, "torso.L" + std::to_string(i), in, config_.hidden[i],
                                      true, config_.layernorm, init_rng));
    in = config_.hidden[i];
  }
  const std::size_t fd = config_.feature_dim();
  const double bound = 1.0 / std::sqrt(static_cast<double>(fd));
  const std::size_t count = config_.head_count();
  for (std::size_t k = 0; k < count; ++k) {
    Matrix w(fd, config_.n_actions), b(1, config_.n_actions);
    for (double& v : w.data()) v = init_rng.uniform(-bound, bound);
    for (double& v : b.data()) v = init_rng.uniform(-bound, bound);
    HeadLayer h;
    h.weight = params_.add("head." + std::to_string(k) + ".W", std::move(w));
    h.bias = params_.add("head." + std::to_string(k) + ".b", std::move(b));
    heads_.push_back(h);
  }
  // Heads that only ever serve as targets are never stepped by the optimizer.
  if (config_.mode == NetMode::IteratedShared) {
    params_.set_frozen(heads_[0].weight, true);
    params_.set_frozen(heads_[0].bias, true);
  } else if (config_.mode == NetMode::EnsembleShared) {
    for (std::size_t p = 0; p < config_.pairs; ++p) {
      params_.set_frozen(heads_[2 * p].weight, true);
      params_.set_frozen(heads_[2 * p].bias, true);
    }
    sync_ensemble();
  }
  if (config_.mode == NetMode::TargetBased) target_ = params_;
}

std::vector<ParamId> MultiHeadQNet::torso_param_ids() const {
  std::vector<ParamId> ids;
  for (const auto& l : torso_) {
    ids.push_back(l.weight);
    ids.push_back(l.bias);
    if (l.ln_gain) ids.push_back(*l.ln_gain);
    if (l.ln_bias) ids.push_back(*l.ln_bias);
  }
  return ids;
}

std::vector<ParamId> MultiHeadQNet::head_param_ids(std::size_t k) const {
  const auto& h = heads_.at(k);
  return {h.weight, h.bias};
}

NodeId MultiHeadQNet::torso_on_tape(Tape& tape, NodeId input, const ParamSet& source,
                                    std::vector<NodeId>* activations) const {
  if (tape.value(input).cols() != config_.input_dim) {
    throw ConfigError("state width " + std::to_string(tape.value(input).cols()) +
                      " does not match network input " + std::to_string(config_.input_dim));
  }
  const MlpTrace trace = forward_mlp(tape, source, torso_, input, config_.layernorm);
  if (activations) *activations = trace.activations;
  return trace.output;
}

NodeId MultiHeadQNet::head_on_tape(Tape& tape, NodeId features, std::size_t k,
                                   const ParamSet& source) const {
  const auto& h = heads_.at(k);
  return tape.add_row(tape.matmul(features, tape.param(source, h.weight)), tape.param(source, h.bias));
}

Matrix MultiHeadQNet::features(const Matrix& states, std::vector<Matrix>* activations) const {
  if (states.cols() != config_.input_dim) {
    throw ConfigError("state width " + std::to_string(states.cols()) +
                      " does not match network input " + std::to_string(config_.input_dim));
  }
  return evaluate_mlp(params_, torso_, states, config_.layernorm, activations);
}

Matrix MultiHeadQNet::apply_head(const Matrix& features, std::size_t k, const ParamSet& source) const {
  const auto& h = heads_.at(k);
  Matrix q = matmul(features, source[h.weight]);
  add_row_inplace(q, source[h.bias]);
  return q;
}

std::vector<Matrix> MultiHeadQNet::q_all_heads(const Matrix& states) const {
  const Matrix f = features(states);
  std::vector<Matrix> out;
  out.reserve(heads_.size());
  for (std::size_t k = 0; k < heads_.size(); ++k) out.push_back(apply_head(f, k, params_));
  return out;
}

Matrix MultiHeadQNet::q_head(const Matrix& states, std::size_t k) const {
  return apply_head(features(states), k, params_);
}

Matrix MultiHeadQNet::q_target(const Matrix& states) const {
  if (!target_) throw UsageError("q_target requires TargetBased mode");
  if (states.cols() != config_.input_dim) throw ConfigError("state width mismatch");
  const Matrix f = evaluate_mlp(*target_, torso_, states, config_.layernorm);
  return apply_head(f, 0, *target_);
}

void MultiHeadQNet::shift_heads() {
  if (config_.mode != NetMode::IteratedShared) throw UsageError("shift_heads requires IteratedShared mode");
  for (std::size_t k = 0; k + 1 < heads_.size(); ++k) {
    params_[heads_[k].weight] = params_[heads_[k + 1].weight];
    params_[heads_[k].bias] = params_[heads_[k + 1].bias];
  }
}

void MultiHeadQNet::sync_target() {
  if (!target_) throw UsageError("sync_target requires TargetBased mode");
  target_->assign_values(params_);
}

void MultiHeadQNet::sync_ensemble() {
  if (config_.mode != NetMode::EnsembleShared) throw UsageError("sync_ensemble requires EnsembleShared mode");
  for (std::size_t p = 0; p < config_.pairs; ++p) {
    params_[heads_[2 * p].weight] = params_[heads_[2 * p + 1].weight];
    params_[heads_[2 * p].bias] = params_[heads_[2 * p + 1].bias];
  }
}

void MultiHeadQNet::target_update() {
  switch (config_.mode) {
    case NetMode::TargetBased: sync_target(); break;
    case NetMode::TargetFree: break;
    case NetMode::IteratedShared: shift_heads(); break;
    case NetMode::EnsembleShared: sync_ensemble(); break;
  }
}

std::vector<std::size_t> MultiHeadQNet::learned_heads() const {
  std::vector<std::size_t> out;
  switch (config_.mode) {
    case NetMode::TargetBased:
    case NetMode::TargetFree: out.push_back(0); break;
    case NetMode::IteratedShared:
      for (std::size_t k = 1; k <= config_.K; ++k) out.push_back(k);
      break;
    case NetMode::EnsembleShared:
      for (std::size_t p = 0; p < config_.pairs; ++p) out.push_back(2 * p + 1);
      break;
  }
  return out;
}

ParamCounts param_count(const MultiHeadQNet& net) {
  ParamCounts c;
  c.online_total = net.params().scalar_count();
  c.target_extra = net.target_params() ? net.target_params()->scalar_count() : 0;
  c.grand_total = c.online_total + c.target_extra;
  return c;
}

ParamCounts param_count_closed_form(NetMode mode, std::size_t torso_size, std::size_t head_size,
                                    std::size_t K, std::size_t pairs) {
  ParamCounts c;
  switch (mode) {
    case NetMode::TargetFree: c.online_total = torso_size + head_size; break;
    case NetMode::TargetBased:
      c.online_total = torso_size + head_size;
      c.target_extra = torso_size + head_size;
      break;
    case NetMode::IteratedShared:
      if (K < 1) throw ConfigError("K must be >= 1");
      c.online_total = torso_size + (K + 1) * head_size;
      break;
    case NetMode::EnsembleShared:
      if (pairs < 1) throw ConfigError("pairs must be >= 1");
      c.online_total = torso_size + 2 * pairs * head_size;
      break;
  }
  c.grand_total = c.online_total + c.target_extra;
  return c;
}

}  // namespace isqn
