#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "isqn/matrix.hpp"

namespace isqn {

class Rng;

/// Finite MDP with dense transition and reward tables.
///
/// Terminal states are absorbing with zero reward; entering one ends the
/// episode.
class TabularMdp {
 public:
  /// `transitions` is laid out [s][a][s′], `rewards` is [s][a].
  TabularMdp(std::string name, std::size_t n_states, std::size_t n_actions,
             std::vector<double> transitions, std::vector<double> rewards,
             std::vector<bool> terminal, double gamma, std::vector<double> initial);

  const std::string& name() const { return name_; }
  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  double gamma() const { return gamma_; }
  std::span<const double> transition(std::size_t s, std::size_t a) const;
  double reward(std::size_t s, std::size_t a) const;
  bool terminal(std::size_t s) const;
  std::span<const double> initial() const { return initial_; }

  std::size_t sample_initial(Rng& rng) const;

 private:
  void require_state_action(std::size_t s, std::size_t a) const;

  std::string name_;
  std::size_t n_states_;
  std::size_t n_actions_;
  std::vector<double> transitions_;
  std::vector<double> rewards_;
  std::vector<bool> terminal_;
  double gamma_;
  std::vector<double> initial_;
};

struct StepResult {
  std::size_t next_state = 0;
  double reward = 0.0;
  bool done = false;
};

StepResult step(const TabularMdp& mdp, std::size_t state, std::size_t action, Rng& rng);

/// (ΓQ)[s,a] = R[s,a] + γ·Σ_{s′} P[s,a,s′]·max_{a′} Q[s′,a′]
Matrix bellman_apply(const TabularMdp& mdp, const Matrix& q);

/// Iterates Γ from zero until ‖Q − ΓQ‖∞ < tol. When `trace` is given it
/// receives ‖Q_{t+1} − Q_t‖∞ for every sweep.
Matrix value_iteration(const TabularMdp& mdp, double tol = 1e-10,
                       std::vector<double>* trace = nullptr);

/// Row-wise argmax with ties broken towards the lowest action.
std::vector<std::size_t> greedy_actions(const Matrix& q);

/// Stochastic policy as an S×A matrix of action probabilities.
Matrix greedy_policy(const Matrix& q);
Matrix uniform_policy(const TabularMdp& mdp);
Matrix epsilon_greedy_policy(const Matrix& q, double epsilon);

/// Expected undiscounted return of `policy` over `horizon` steps from the
/// initial distribution, by backward induction.
double policy_return(const TabularMdp& mdp, const Matrix& policy, std::size_t horizon);

/// States with positive probability of being visited under some policy.
std::vector<bool> reachable_states(const TabularMdp& mdp);

/// Score anchors for normalized returns: the uniform policy and the greedy
/// policy of the exact optimal Q.
struct Normalizer {
  double random = 0.0;
  double reference = 1.0;

  /// ConfigError when both anchors coincide.
  double normalize(double value) const;
};

Normalizer make_normalizer(const TabularMdp& mdp, std::size_t horizon);

enum class EncoderKind { OneHot, RandomProjection };

/// Maps state indices to feature rows.
class FeatureEncoder {
 public:
  static FeatureEncoder one_hot(std::size_t n_states);
  /// Fixed random features of width `dim` with unit-variance entries.
  static FeatureEncoder random_projection(std::size_t n_states, std::size_t dim,
                                          std::uint64_t seed);

  EncoderKind kind() const { return kind_; }
  std::size_t n_states() const { return table_.rows(); }
  std::size_t dim() const { return table_.cols(); }
  const Matrix& table() const { return table_; }
  std::span<const double> row(std::size_t state) const;
  Matrix encode(std::span<const std::size_t> states) const;

 private:
  FeatureEncoder(EncoderKind kind, Matrix table) : kind_(kind), table_(std::move(table)) {}

  EncoderKind kind_;
  Matrix table_;
};

}  // namespace isqn
