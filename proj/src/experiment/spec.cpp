#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "isqn/errors.hpp"
#include "isqn/experiment.hpp"
#include "isqn/mdp_io.hpp"
#include "isqn/stock.hpp"

extern char** environ;

namespace isqn {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::size_t to_count(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + v + "'");
}

bool to_bool(const std::string& key, const std::string& v) {
  const std::string l = lower(v);
  if (l == "true" || l == "1" || l == "yes") return true;
  if (l == "false" || l == "0" || l == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v, char sep = ',') {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::size_t> to_sizes(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  if (trim(v) == "none") return out;
  for (const auto& item : split_list(v)) out.push_back(to_count(key, item));
  return out;
}

std::vector<std::uint64_t> to_seeds(const std::string& v) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(v)) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.push_back(to_count("seeds", item));
      continue;
    }
    const std::size_t lo = to_count("seeds", trim(item.substr(0, dash)));
    const std::size_t hi = to_count("seeds", trim(item.substr(dash + 1)));
    if (hi < lo) throw ConfigError("seeds: empty range '" + item + "'");
    for (std::size_t s = lo; s <= hi; ++s) out.push_back(s);
  }
  return out;
}

using Setter = std::function<void(TrainConfig&, const std::string& key, const std::string& value)>;

struct TrainKey {
  const char* name;
  const char* fallback;
  Setter set;
};

// Training keys accepted at the top level (defaults for every cell) and on
// cell lines. The defaults are desk-scale values.
const std::vector<TrainKey>& train_keys() {
  static const std::vector<TrainKey> keys = {
      {"mode", "iS", [](TrainConfig& c, auto&, auto& v) { c.net.mode = parse_net_mode(v); }},
      {"K", "1", [](TrainConfig& c, auto& k, auto& v) { c.net.K = to_count(k, v); }},
      {"P", "1", [](TrainConfig& c, auto& k, auto& v) { c.net.pairs = to_count(k, v); }},
      {"hidden", "32,32", [](TrainConfig& c, auto& k, auto& v) { c.net.hidden = to_sizes(k, v); }},
      {"layernorm", "true", [](TrainConfig& c, auto& k, auto& v) { c.net.layernorm = to_bool(k, v); }},
      {"T", "100", [](TrainConfig& c, auto& k, auto& v) { c.T = to_count(k, v); }},
      {"G", "1", [](TrainConfig& c, auto& k, auto& v) { c.G = to_count(k, v); }},
      {"batch", "32", [](TrainConfig& c, auto& k, auto& v) { c.batch_size = to_count(k, v); }},
      {"buffer", "10000", [](TrainConfig& c, auto& k, auto& v) { c.buffer_capacity = to_count(k, v); }},
      {"warmup", "500", [](TrainConfig& c, auto& k, auto& v) { c.warmup = to_count(k, v); }},
      {"epoch_steps", "1000", [](TrainConfig& c, auto& k, auto& v) { c.epoch_steps = to_count(k, v); }},
      {"horizon", "200", [](TrainConfig& c, auto& k, auto& v) { c.horizon = to_count(k, v); }},
      {"eps_start", "1", [](TrainConfig& c, auto& k, auto& v) { c.epsilon.start = to_double(k, v); }},
      {"eps_end", "0.01", [](TrainConfig& c, auto& k, auto& v) { c.epsilon.end = to_double(k, v); }},
      {"eps_decay", "2500", [](TrainConfig& c, auto& k, auto& v) { c.epsilon.decay_steps = to_count(k, v); }},
      {"optimizer", "adam",
       [](TrainConfig& c, auto& k, auto& v) {
         const std::string l = lower(v);
         if (l == "adam") c.optimizer = OptimizerKind::Adam;
         else if (l == "sgd") c.optimizer = OptimizerKind::Sgd;
         else throw ConfigError(k + ": expected adam or sgd, got '" + v + "'");
       }},
      {"lr", "0.003", [](TrainConfig& c, auto& k, auto& v) { c.adam.learning_rate = to_double(k, v); }},
      {"adam_eps", "0.00015", [](TrainConfig& c, auto& k, auto& v) { c.adam.epsilon = to_double(k, v); }},
      {"sgd_lr", "0.1", [](TrainConfig& c, auto& k, auto& v) { c.sgd_lr = to_double(k, v); }},
      {"meta_lr", "0.1", [](TrainConfig& c, auto& k, auto& v) { c.meta_lr = to_double(k, v); }},
      {"gamma", "0.99", [](TrainConfig& c, auto& k, auto& v) { c.loss.gamma = to_double(k, v); }},
      {"weighting", "uniform",
       [](TrainConfig& c, auto& k, auto& v) {
         const std::string l = lower(v);
         if (l == "uniform") c.loss.weighting = Weighting::Uniform;
         else if (l == "discounted") c.loss.weighting = Weighting::Discounted;
         else if (l == "meta") c.loss.weighting = Weighting::Meta;
         else throw ConfigError(k + ": expected uniform, discounted or meta, got '" + v + "'");
       }},
      {"discount_factor", "0.25", [](TrainConfig& c, auto& k, auto& v) { c.loss.discount_factor = to_double(k, v); }},
      {"operator", "max",
       [](TrainConfig& c, auto& k, auto& v) {
         const std::string l = lower(v);
         if (l == "max") c.loss.backup = BackupOperator::Max;
         else if (l == "mellowmax") c.loss.backup = BackupOperator::MellowMax;
         else throw ConfigError(k + ": expected max or mellowmax, got '" + v + "'");
       }},
      {"mellowmax_omega", "30", [](TrainConfig& c, auto& k, auto& v) { c.loss.mellowmax_omega = to_double(k, v); }},
      {"cql_alpha", "0", [](TrainConfig& c, auto& k, auto& v) { c.loss.conservative_alpha = to_double(k, v); }},
      {"freeze_torso", "false", [](TrainConfig& c, auto& k, auto& v) { c.freeze_torso = to_bool(k, v); }},
      {"returns", "greedy",
       [](TrainConfig& c, auto& k, auto& v) {
         const std::string l = lower(v);
         if (l == "greedy") c.returns = ReturnEstimate::Greedy;
         else if (l == "episodes") c.returns = ReturnEstimate::Episodes;
         else throw ConfigError(k + ": expected greedy or episodes, got '" + v + "'");
       }},
      {"diag.churn", "false", [](TrainConfig& c, auto& k, auto& v) { c.diagnostics.churn = to_bool(k, v); }},
      {"diag.churn_target", "freshest",
       [](TrainConfig& c, auto& k, auto& v) {
         const std::string l = lower(v);
         if (l == "freshest") c.diagnostics.churn_target = ChurnTarget::Freshest;
         else if (l == "all") c.diagnostics.churn_target = ChurnTarget::AllLinks;
         else throw ConfigError(k + ": expected freshest or all, got '" + v + "'");
       }},
      {"diag.cosines", "false", [](TrainConfig& c, auto& k, auto& v) { c.diagnostics.cosines = to_bool(k, v); }},
      {"diag.cosine_steps", "0", [](TrainConfig& c, auto& k, auto& v) { c.diagnostics.cosine_steps = to_count(k, v); }},
      {"diag.features", "false", [](TrainConfig& c, auto& k, auto& v) { c.diagnostics.features = to_bool(k, v); }},
      {"diag.probe", "256", [](TrainConfig& c, auto& k, auto& v) { c.diagnostics.probe_size = to_count(k, v); }},
      {"diag.srank_delta", "0.01", [](TrainConfig& c, auto& k, auto& v) { c.diagnostics.srank_delta = to_double(k, v); }},
      {"diag.dormant_tau", "0.025", [](TrainConfig& c, auto& k, auto& v) { c.diagnostics.dormant_tau = to_double(k, v); }},
  };
  return keys;
}

const TrainKey* find_train_key(const std::string& key) {
  for (const auto& k : train_keys())
    if (key == k.name) return &k;
  return nullptr;
}

const std::vector<std::pair<const char*, const char*>>& experiment_keys() {
  static const std::vector<std::pair<const char*, const char*>> keys = {
      {"env", "chain"},         {"encoder", "onehot"},      {"seeds", ""},
      {"epochs", "10"},         {"out", "out"},             {"offline", "false"},
      {"dataset.size", "10000"}, {"dataset.coverage", "0.1"}, {"dataset.epsilon", "0.5"},
      {"baseline", "TB"},       {"workers", "1"},           {"ablate.axis", ""},
      {"ablate.values", ""},
  };
  return keys;
}

bool is_experiment_key(const std::string& key) {
  for (const auto& [k, v] : experiment_keys())
    if (key == k) return true;
  return false;
}

std::string env_name_for(const std::string& key) {
  std::string out = kEnvPrefix;
  for (char c : key) out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

void apply_cell_key(TrainConfig& config, const std::string& key, const std::string& value) {
  if (key == "width") {
    if (config.net.hidden.empty()) throw ConfigError("width: the network has no hidden layer");
    config.net.hidden.back() = to_count(key, value);
    return;
  }
  const TrainKey* k = find_train_key(key);
  if (!k) throw ConfigError("unknown key '" + key + "'");
  k->set(config, key, value);
}

std::map<std::string, std::string> process_environment() {
  std::map<std::string, std::string> out;
  const std::string prefix = kEnvPrefix;
  for (char** e = environ; e && *e; ++e) {
    const std::string entry = *e;
    if (entry.rfind(prefix, 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    out[entry.substr(0, eq)] = entry.substr(eq + 1);
  }
  return out;
}

ExperimentSpec parse_experiment(const std::string& text, const std::string& source,
                                const std::map<std::string, std::string>& environment) {
  std::map<std::string, std::string> values;
  std::map<std::string, std::size_t> value_line;
  for (const auto& [k, v] : experiment_keys()) values[k] = v;
  for (const auto& k : train_keys()) values[k.name] = k.fallback;

  struct CellLine {
    std::string label;
    std::string body;
    std::size_t line;
  };
  std::vector<CellLine> cell_lines;
  std::set<std::string> seen;

  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  auto fail = [&](std::size_t line, const std::string& msg) -> ConfigError {
    return ConfigError(source + ":" + std::to_string(line) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw fail(lineno, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw fail(lineno, "missing key");
    if (!seen.insert(key).second) throw fail(lineno, "duplicate key '" + key + "'");
    if (key.rfind("cell.", 0) == 0) {
      const std::string label = key.substr(5);
      if (label.empty() || label.find_first_of(" /\\") != std::string::npos) {
        throw fail(lineno, "invalid cell label '" + label + "'");
      }
      cell_lines.push_back({label, value, lineno});
      continue;
    }
    if (!is_experiment_key(key) && !find_train_key(key)) throw fail(lineno, "unknown key '" + key + "'");
    values[key] = value;
    value_line[key] = lineno;
  }
  for (auto& [key, value] : values) {
    auto it = environment.find(env_name_for(key));
    if (it != environment.end()) {
      value = it->second;
      value_line[key] = 0;
    }
  }
  auto where = [&](const std::string& key) {
    auto it = value_line.find(key);
    if (it == value_line.end()) return source + ": default '" + key + "'";
    if (it->second == 0) return source + ": environment " + env_name_for(key);
    return source + ":" + std::to_string(it->second);
  };

  ExperimentSpec spec;
  try {
    spec.env = values["env"];
    spec.encoder = values["encoder"];
    spec.seeds = to_seeds(values["seeds"]);
    spec.epochs = to_count("epochs", values["epochs"]);
    spec.out = values["out"];
    spec.offline = to_bool("offline", values["offline"]);
    spec.dataset.size = to_count("dataset.size", values["dataset.size"]);
    spec.dataset.coverage = to_double("dataset.coverage", values["dataset.coverage"]);
    spec.dataset.epsilon = to_double("dataset.epsilon", values["dataset.epsilon"]);
    spec.baseline = values["baseline"];
    spec.workers = to_count("workers", values["workers"]);
    spec.ablate_axis = values["ablate.axis"];
    spec.ablate_values = split_list(values["ablate.values"]);
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  TrainConfig defaults;
  for (const auto& k : train_keys()) {
    try {
      k.set(defaults, k.name, values[k.name]);
    } catch (const ConfigError& e) {
      throw ConfigError(where(k.name) + ": " + e.what());
    }
  }
  for (const CellLine& cl : cell_lines) {
    CellSpec cell;
    cell.label = cl.label;
    cell.train = defaults;
    for (const auto& item : split_list(cl.body, ' ')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw fail(cl.line, "cell entry '" + item + "' is not key=value");
      const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
      if (!cell.overrides.emplace(key, value).second) throw fail(cl.line, "duplicate cell key '" + key + "'");
    }
    // Structural keys go first so that `width` sees the final hidden layout.
    for (const auto& [key, value] : cell.overrides) {
      if (key == "width") continue;
      try {
        apply_cell_key(cell.train, key, value);
      } catch (const ConfigError& e) {
        throw fail(cl.line, e.what());
      }
    }
    if (auto it = cell.overrides.find("width"); it != cell.overrides.end()) {
      try {
        apply_cell_key(cell.train, "width", it->second);
      } catch (const ConfigError& e) {
        throw fail(cl.line, e.what());
      }
    }
    spec.cells.push_back(std::move(cell));
  }
  spec.resolved = values;
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return spec;
}

ExperimentSpec load_experiment(const std::filesystem::path& path, bool use_environment) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read experiment file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment(buf.str(), path.string(),
                          use_environment ? process_environment() : std::map<std::string, std::string>{});
}

void ExperimentSpec::validate() const {
  if (seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("seeds: duplicate seed");
  }
  if (cells.empty()) throw ConfigError("no cells: add at least one 'cell.<label> = ...' line");
  std::set<std::string> labels;
  for (const auto& c : cells) {
    if (!labels.insert(c.label).second) throw ConfigError("duplicate cell label '" + c.label + "'");
    TrainConfig probe = c.train;
    probe.net.input_dim = probe.net.input_dim ? probe.net.input_dim : 1;
    probe.net.n_actions = probe.net.n_actions ? probe.net.n_actions : 2;
    try {
      probe.validate();
    } catch (const ConfigError& e) {
      throw ConfigError("cell '" + c.label + "': " + e.what());
    }
  }
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (workers == 0) throw ConfigError("workers must be positive");
  if (offline && !(dataset.coverage > 0.0 && dataset.coverage <= 1.0)) {
    throw ConfigError("dataset.coverage must lie in (0, 1]");
  }
  if (offline && dataset.size == 0) throw ConfigError("dataset.size must be positive");
  if (!(dataset.epsilon >= 0.0 && dataset.epsilon <= 1.0)) throw ConfigError("dataset.epsilon must lie in [0, 1]");
  if (!ablate_axis.empty() && ablate_axis != "K" && ablate_axis != "T" && ablate_axis != "width") {
    throw ConfigError("ablate.axis must be K, T or width");
  }
  resolve_env(env);
  resolve_encoder(encoder, 1);
}

std::string ExperimentSpec::resolved_text() const {
  std::string out = "# resolved experiment configuration\n";
  for (const auto& [k, v] : resolved) out += k + " = " + v + "\n";
  for (const auto& c : cells) {
    out += "cell." + c.label + " =";
    for (const auto& [k, v] : c.overrides) out += " " + k + "=" + v;
    out += "\n";
  }
  return out;
}

TabularMdp resolve_env(const std::string& env) {
  if (env == "chain" || env == "gridworld") return make_stock_env(env);
  if (env.size() > 5 && env.substr(env.size() - 5) == ".json") return load_mdp(env);
  throw ConfigError("env: expected chain, gridworld or a .json MDP file, got '" + env + "'");
}

FeatureEncoder resolve_encoder(const std::string& encoder, std::size_t n_states) {
  if (encoder == "onehot") return FeatureEncoder::one_hot(n_states);
  if (encoder.rfind("random:", 0) == 0) {
    const std::size_t dim = to_count("encoder", encoder.substr(7));
    if (dim == 0) throw ConfigError("encoder: random projection width must be positive");
    return FeatureEncoder::random_projection(n_states, dim, 0);
  }
  throw ConfigError("encoder: expected onehot or random:<dim>, got '" + encoder + "'");
}

}  // namespace isqn
