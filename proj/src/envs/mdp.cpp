#include "isqn/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "isqn/errors.hpp"
#include "isqn/rng.hpp"

namespace isqn {

namespace {

constexpr double kSumTolerance = 1e-12;

void require_distribution(std::span<const double> p, const std::string& what) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(what + " has a negative or non-finite entry");
    total += v;
  }
  if (std::abs(total - 1.0) > kSumTolerance) {
    throw ConfigError(what + " sums to " + std::to_string(total) + " instead of 1");
  }
}

std::size_t sample_categorical(std::span<const double> p, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    acc += p[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

}  // namespace

TabularMdp::TabularMdp(std::string name, std::size_t n_states, std::size_t n_actions,
                       std::vector<double> transitions, std::vector<double> rewards,
                       std::vector<bool> terminal, double gamma, std::vector<double> initial)
    : name_(std::move(name)),
      n_states_(n_states),
      n_actions_(n_actions),
      transitions_(std::move(transitions)),
      rewards_(std::move(rewards)),
      terminal_(std::move(terminal)),
      gamma_(gamma),
      initial_(std::move(initial)) {
  if (n_states_ == 0 || n_actions_ == 0) throw ConfigError("MDP needs at least one state and action");
  if (transitions_.size() != n_states_ * n_actions_ * n_states_) {
    throw ConfigError("transition table has the wrong size");
  }
  if (rewards_.size() != n_states_ * n_actions_) throw ConfigError("reward table has the wrong size");
  if (terminal_.size() != n_states_) throw ConfigError("terminal mask has the wrong size");
  if (initial_.size() != n_states_) throw ConfigError("initial distribution has the wrong size");
  if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  for (double r : rewards_) {
    if (!std::isfinite(r)) throw ConfigError("reward table has a non-finite entry");
  }
  for (std::size_t s = 0; s < n_states_; ++s) {
    for (std::size_t a = 0; a < n_actions_; ++a) {
      const std::string where = "P[" + std::to_string(s) + "," + std::to_string(a) + ",:]";
      require_distribution(transition(s, a), where);
      if (terminal_[s] && (transition(s, a)[s] != 1.0 || reward(s, a) != 0.0)) {
        throw ConfigError("terminal state " + std::to_string(s) +
                          " must self-loop with zero reward");
      }
    }
  }
  require_distribution(initial_, "initial distribution");
}

void TabularMdp::require_state_action(std::size_t s, std::size_t a) const {
  if (s >= n_states_ || a >= n_actions_) {
    throw UsageError("state " + std::to_string(s) + " / action " + std::to_string(a) +
                     " outside MDP '" + name_ + "'");
  }
}

std::span<const double> TabularMdp::transition(std::size_t s, std::size_t a) const {
  require_state_action(s, a);
  return std::span<const double>(transitions_).subspan((s * n_actions_ + a) * n_states_, n_states_);
}

double TabularMdp::reward(std::size_t s, std::size_t a) const {
  require_state_action(s, a);
  return rewards_[s * n_actions_ + a];
}

bool TabularMdp::terminal(std::size_t s) const {
  require_state_action(s, 0);
  return terminal_[s];
}

std::size_t TabularMdp::sample_initial(Rng& rng) const { return sample_categorical(initial_, rng); }

StepResult step(const TabularMdp& mdp, std::size_t state, std::size_t action, Rng& rng) {
  if (mdp.terminal(state)) {
    if (action >= mdp.n_actions()) throw UsageError("action outside MDP");
    return {state, 0.0, true};
  }
  StepResult out;
  out.reward = mdp.reward(state, action);
  out.next_state = sample_categorical(mdp.transition(state, action), rng);
  out.done = mdp.terminal(out.next_state);
  return out;
}

Matrix bellman_apply(const TabularMdp& mdp, const Matrix& q) {
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  if (q.rows() != S || q.cols() != A) throw ConfigError("Q table shape does not match the MDP");
  std::vector<double> best(S);
  for (std::size_t s = 0; s < S; ++s) {
    auto row = q.row(s);
    best[s] = *std::max_element(row.begin(), row.end());
  }
  Matrix out(S, A);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      auto p = mdp.transition(s, a);
      double expect = 0.0;
      for (std::size_t n = 0; n < S; ++n) expect += p[n] * best[n];
      out(s, a) = mdp.reward(s, a) + mdp.gamma() * expect;
    }
  }
  return out;
}

Matrix value_iteration(const TabularMdp& mdp, double tol, std::vector<double>* trace) {
  if (!(tol > 0.0)) throw ConfigError("value iteration tolerance must be positive");
  Matrix q(mdp.n_states(), mdp.n_actions());
  for (;;) {
    Matrix next = bellman_apply(mdp, q);
    const double residual = max_abs_diff(next, q);
    if (trace) trace->push_back(residual);
    q = std::move(next);
    if (residual < tol) return q;
  }
}

std::vector<std::size_t> greedy_actions(const Matrix& q) {
  std::vector<std::size_t> out(q.rows());
  for (std::size_t s = 0; s < q.rows(); ++s) {
    auto row = q.row(s);
    out[s] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

Matrix greedy_policy(const Matrix& q) { return epsilon_greedy_policy(q, 0.0); }

Matrix uniform_policy(const TabularMdp& mdp) {
  Matrix p(mdp.n_states(), mdp.n_actions());
  p.fill(1.0 / static_cast<double>(mdp.n_actions()));
  return p;
}

Matrix epsilon_greedy_policy(const Matrix& q, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
  Matrix p(q.rows(), q.cols());
  p.fill(epsilon / static_cast<double>(q.cols()));
  const auto best = greedy_actions(q);
  for (std::size_t s = 0; s < q.rows(); ++s) p(s, best[s]) += 1.0 - epsilon;
  return p;
}

double policy_return(const TabularMdp& mdp, const Matrix& policy, std::size_t horizon) {
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  if (policy.rows() != S || policy.cols() != A) throw ConfigError("policy shape does not match the MDP");
  std::vector<double> v(S, 0.0), next(S, 0.0);
  for (std::size_t t = 0; t < horizon; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      if (mdp.terminal(s)) {
        next[s] = 0.0;
        continue;
      }
      double acc = 0.0;
      for (std::size_t a = 0; a < A; ++a) {
        if (policy(s, a) == 0.0) continue;
        auto p = mdp.transition(s, a);
        double cont = 0.0;
        for (std::size_t n = 0; n < S; ++n) cont += p[n] * v[n];
        acc += policy(s, a) * (mdp.reward(s, a) + cont);
      }
      next[s] = acc;
    }
    std::swap(v, next);
  }
  double total = 0.0;
  for (std::size_t s = 0; s < S; ++s) total += mdp.initial()[s] * v[s];
  return total;
}

std::vector<bool> reachable_states(const TabularMdp& mdp) {
  const std::size_t S = mdp.n_states();
  std::vector<bool> seen(S, false);
  std::vector<std::size_t> frontier;
  for (std::size_t s = 0; s < S; ++s) {
    if (mdp.initial()[s] > 0.0) {
      seen[s] = true;
      frontier.push_back(s);
    }
  }
  while (!frontier.empty()) {
    const std::size_t s = frontier.back();
    frontier.pop_back();
    if (mdp.terminal(s)) continue;
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      auto p = mdp.transition(s, a);
      for (std::size_t n = 0; n < S; ++n) {
        if (p[n] > 0.0 && !seen[n]) {
          seen[n] = true;
          frontier.push_back(n);
        }
      }
    }
  }
  return seen;
}

double Normalizer::normalize(double value) const {
  if (reference == random) throw ConfigError("normalizer reference equals random score");
  return (value - random) / (reference - random);
}

Normalizer make_normalizer(const TabularMdp& mdp, std::size_t horizon) {
  Normalizer n;
  n.random = policy_return(mdp, uniform_policy(mdp), horizon);
  n.reference = policy_return(mdp, greedy_policy(value_iteration(mdp)), horizon);
  return n;
}

FeatureEncoder FeatureEncoder::one_hot(std::size_t n_states) {
  if (n_states == 0) throw ConfigError("encoder needs at least one state");
  Matrix t(n_states, n_states);
  for (std::size_t s = 0; s < n_states; ++s) t(s, s) = 1.0;
  return FeatureEncoder(EncoderKind::OneHot, std::move(t));
}

FeatureEncoder FeatureEncoder::random_projection(std::size_t n_states, std::size_t dim,
                                                 std::uint64_t seed) {
  if (n_states == 0 || dim == 0) throw ConfigError("encoder needs positive state count and width");
  Rng rng = Rng::stream(seed, "encoder");
  Matrix t(n_states, dim);
  const double half_width = std::sqrt(3.0);
  for (double& v : t.data()) v = rng.uniform(-half_width, half_width);
  return FeatureEncoder(EncoderKind::RandomProjection, std::move(t));
}

std::span<const double> FeatureEncoder::row(std::size_t state) const {
  if (state >= table_.rows()) throw UsageError("state outside encoder table");
  return table_.row(state);
}

Matrix FeatureEncoder::encode(std::span<const std::size_t> states) const {
  Matrix out(states.size(), dim());
  for (std::size_t i = 0; i < states.size(); ++i) {
    auto src = row(states[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace isqn
