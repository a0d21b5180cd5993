#include "isqn/replay.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "isqn/errors.hpp"
#include "isqn/rng.hpp"

namespace isqn {

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t state_dim)
    : capacity_(capacity),
      dim_(state_dim),
      states_(capacity * state_dim),
      next_states_(capacity * state_dim),
      actions_(capacity),
      rewards_(capacity),
      dones_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
  if (state_dim == 0) throw ConfigError("replay buffer state width must be positive");
}

std::size_t ReplayBuffer::slot(std::size_t i) const {
  if (i >= size_) throw UsageError("replay index " + std::to_string(i) + " beyond size " + std::to_string(size_));
  return (head_ + capacity_ - size_ + i) % capacity_;
}

void ReplayBuffer::add(std::span<const double> state, std::size_t action, double reward,
                       std::span<const double> next_state, bool done) {
  if (state.size() != dim_ || next_state.size() != dim_) {
    throw ConfigError("transition width does not match the replay buffer");
  }
  if (!std::isfinite(reward)) throw NumericError("transition reward is not finite");
  std::copy(state.begin(), state.end(), states_.begin() + head_ * dim_);
  std::copy(next_state.begin(), next_state.end(), next_states_.begin() + head_ * dim_);
  actions_[head_] = action;
  rewards_[head_] = reward;
  dones_[head_] = done ? 1.0 : 0.0;
  head_ = (head_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
  ++inserted_;
}

Transition ReplayBuffer::at(std::size_t i) const {
  const std::size_t k = slot(i);
  Transition t;
  t.state.assign(states_.begin() + k * dim_, states_.begin() + (k + 1) * dim_);
  t.next_state.assign(next_states_.begin() + k * dim_, next_states_.begin() + (k + 1) * dim_);
  t.action = actions_[k];
  t.reward = rewards_[k];
  t.done = dones_[k] != 0.0;
  return t;
}

Batch ReplayBuffer::gather(std::span<const std::size_t> indices) const {
  Batch b;
  b.states = Matrix(indices.size(), dim_);
  b.next_states = Matrix(indices.size(), dim_);
  b.actions.reserve(indices.size());
  b.rewards.reserve(indices.size());
  b.dones.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t k = slot(indices[r]);
    std::copy_n(states_.begin() + k * dim_, dim_, b.states.row(r).begin());
    std::copy_n(next_states_.begin() + k * dim_, dim_, b.next_states.row(r).begin());
    b.actions.push_back(actions_[k]);
    b.rewards.push_back(rewards_[k]);
    b.dones.push_back(dones_[k]);
  }
  return b;
}

Batch ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  if (size_ == 0) throw UsageError("sampling from an empty replay buffer");
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = rng.below(size_);
  return gather(idx);
}

}  // namespace isqn
