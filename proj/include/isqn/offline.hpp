#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "isqn/matrix.hpp"
#include "isqn/mdp.hpp"

namespace isqn {

class Rng;

struct TabularTransition {
  std::size_t state = 0;
  std::size_t action = 0;
  double reward = 0.0;
  std::size_t next_state = 0;
  bool done = false;

  bool operator==(const TabularTransition&) const = default;
};

struct OfflineDataset {
  std::vector<TabularTransition> transitions;
  std::string provenance;
  double coverage = 1.0;

  /// ConfigError if any index is outside the MDP.
  void validate(const TabularMdp& mdp) const;
};

/// Rolls out `policy` (an S×A probability matrix) for `n` transitions,
/// restarting on termination or after `horizon` steps, then keeps a uniform
/// subsample of round(coverage·n) transitions in their original order.
/// Timeouts are stored with done = false.
OfflineDataset generate_offline(const TabularMdp& mdp, const Matrix& policy, std::size_t n,
                                double coverage, std::size_t horizon, Rng& rng,
                                std::string provenance = "");

void write_dataset_csv(const OfflineDataset& data, const std::filesystem::path& path);
OfflineDataset read_dataset_csv(const std::filesystem::path& path, const TabularMdp& mdp);

}  // namespace isqn
