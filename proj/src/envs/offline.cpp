#include "isqn/offline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "isqn/errors.hpp"
#include "isqn/rng.hpp"

namespace isqn {

void OfflineDataset::validate(const TabularMdp& mdp) const {
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    const TabularTransition& t = transitions[i];
    if (t.state >= mdp.n_states() || t.next_state >= mdp.n_states() || t.action >= mdp.n_actions()) {
      throw ConfigError("transition " + std::to_string(i) + " has indices outside MDP '" +
                        mdp.name() + "'");
    }
    if (!std::isfinite(t.reward)) throw ConfigError("transition " + std::to_string(i) + " has a non-finite reward");
  }
}

OfflineDataset generate_offline(const TabularMdp& mdp, const Matrix& policy, std::size_t n,
                                double coverage, std::size_t horizon, Rng& rng,
                                std::string provenance) {
  if (n == 0) throw ConfigError("offline dataset needs at least one transition");
  if (!(coverage > 0.0 && coverage <= 1.0)) throw ConfigError("coverage must lie in (0, 1]");
  if (horizon == 0) throw ConfigError("horizon must be positive");
  if (policy.rows() != mdp.n_states() || policy.cols() != mdp.n_actions()) {
    throw ConfigError("policy shape does not match the MDP");
  }
  std::vector<TabularTransition> rollout;
  rollout.reserve(n);
  std::size_t state = mdp.sample_initial(rng);
  std::size_t t = 0;
  while (rollout.size() < n) {
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t action = mdp.n_actions() - 1;
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      acc += policy(state, a);
      if (u < acc) {
        action = a;
        break;
      }
    }
    const StepResult r = step(mdp, state, action, rng);
    rollout.push_back({state, action, r.reward, r.next_state, r.done});
    state = r.next_state;
    if (r.done || ++t >= horizon) {
      state = mdp.sample_initial(rng);
      t = 0;
    }
  }

  const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(coverage * static_cast<double>(n))));
  std::vector<std::size_t> index(n);
  std::iota(index.begin(), index.end(), 0);
  for (std::size_t i = 0; i < keep; ++i) std::swap(index[i], index[i + rng.below(n - i)]);
  index.resize(keep);
  std::sort(index.begin(), index.end());

  OfflineDataset out;
  out.coverage = coverage;
  out.provenance = std::move(provenance);
  out.transitions.reserve(keep);
  for (std::size_t i : index) out.transitions.push_back(rollout[i]);
  return out;
}

void write_dataset_csv(const OfflineDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write dataset to " + path.string());
  out.precision(17);
  out << "s,a,r,s_next,done\n";
  for (const auto& t : data.transitions) {
    out << t.state << ',' << t.action << ',' << t.reward << ',' << t.next_state << ','
        << (t.done ? 1 : 0) << '\n';
  }
  if (!out) throw ConfigError("failed writing dataset to " + path.string());
}

OfflineDataset read_dataset_csv(const std::filesystem::path& path, const TabularMdp& mdp) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read dataset " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "s,a,r,s_next,done") {
    throw ConfigError(path.string() + ":1: expected header s,a,r,s_next,done");
  }
  OfflineDataset data;
  data.provenance = path.string();
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    TabularTransition t;
    char c1 = 0, c2 = 0, c3 = 0, c4 = 0;
    int done = -1;
    row >> t.state >> c1 >> t.action >> c2 >> t.reward >> c3 >> t.next_state >> c4 >> done;
    if (!row || c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',' || (done != 0 && done != 1)) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": malformed transition");
    }
    t.done = done == 1;
    data.transitions.push_back(t);
  }
  data.validate(mdp);
  return data;
}

}  // namespace isqn
