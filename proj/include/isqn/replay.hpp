#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "isqn/losses.hpp"

namespace isqn {

class Rng;

struct Transition {
  std::vector<double> state;
  std::size_t action = 0;
  double reward = 0.0;
  std::vector<double> next_state;
  bool done = false;
};

/// Fixed-capacity FIFO of transitions over feature vectors.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t state_dim);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return size_; }
  std::size_t state_dim() const { return dim_; }
  /// Total number of insertions, including evicted ones.
  std::size_t inserted() const { return inserted_; }

  void add(std::span<const double> state, std::size_t action, double reward,
           std::span<const double> next_state, bool done);
  void add(const Transition& t) { add(t.state, t.action, t.reward, t.next_state, t.done); }

  /// i-th stored transition, oldest first.
  Transition at(std::size_t i) const;

  /// `n` transitions drawn uniformly with replacement.
  Batch sample(std::size_t n, Rng& rng) const;
  /// Batch made of the given logical indices (oldest first numbering).
  Batch gather(std::span<const std::size_t> indices) const;

 private:
  std::size_t slot(std::size_t i) const;

  std::size_t capacity_;
  std::size_t dim_;
  std::size_t size_ = 0;
  std::size_t head_ = 0;
  std::size_t inserted_ = 0;
  std::vector<double> states_;
  std::vector<double> next_states_;
  std::vector<std::size_t> actions_;
  std::vector<double> rewards_;
  std::vector<double> dones_;
};

}  // namespace isqn
