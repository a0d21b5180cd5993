#include "isqn/checkpoint.hpp"

#include <fstream>

#include "isqn/errors.hpp"
#include "isqn/rng.hpp"

namespace isqn {

namespace {

nlohmann::json array_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()},
          {"data", std::vector<double>(m.data().begin(), m.data().end())}};
}

Matrix array_from_json(const nlohmann::json& j, const std::string& key) {
  try {
    return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                  j.at("data").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("checkpoint array '" + key + "': " + e.what());
  }
}

void write_set(nlohmann::json& arrays, const ParamSet& set, const std::string& prefix) {
  for (std::size_t i = 0; i < set.size(); ++i) arrays[prefix + set.name(i)] = array_to_json(set[i]);
}

void read_set(const nlohmann::json& arrays, ParamSet& set, const std::string& prefix) {
  for (std::size_t i = 0; i < set.size(); ++i) {
    const std::string key = prefix + set.name(i);
    if (!arrays.contains(key)) throw ConfigError("checkpoint is missing array '" + key + "'");
    Matrix m = array_from_json(arrays.at(key), key);
    if (!m.same_shape(set[i])) throw ConfigError("checkpoint array '" + key + "' has the wrong shape");
    set[i] = std::move(m);
  }
}

}  // namespace

nlohmann::json checkpoint_to_json(const MultiHeadQNet& net) {
  const NetConfig& c = net.config();
  nlohmann::json doc;
  doc["format"] = "isqn-checkpoint";
  doc["version"] = kCheckpointVersion;
  doc["config"] = {{"input_dim", c.input_dim}, {"hidden", c.hidden},       {"n_actions", c.n_actions},
                   {"layernorm", c.layernorm}, {"mode", to_string(c.mode)}, {"K", c.K},
                   {"pairs", c.pairs}};
  nlohmann::json arrays = nlohmann::json::object();
  write_set(arrays, net.params(), "");
  if (net.target_params()) write_set(arrays, *net.target_params(), "target.");
  doc["arrays"] = std::move(arrays);
  return doc;
}

MultiHeadQNet checkpoint_from_json(const nlohmann::json& doc) {
  if (doc.value("format", "") != "isqn-checkpoint") throw ConfigError("not an isqn checkpoint");
  if (doc.value("version", 0) != kCheckpointVersion) {
    throw ConfigError("unsupported checkpoint version " + doc.value("version", nlohmann::json()).dump());
  }
  NetConfig c;
  try {
    const auto& jc = doc.at("config");
    c.input_dim = jc.at("input_dim").get<std::size_t>();
    c.hidden = jc.at("hidden").get<std::vector<std::size_t>>();
    c.n_actions = jc.at("n_actions").get<std::size_t>();
    c.layernorm = jc.at("layernorm").get<bool>();
    c.mode = parse_net_mode(jc.at("mode").get<std::string>());
    c.K = jc.at("K").get<std::size_t>();
    c.pairs = jc.at("pairs").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint config: ") + e.what());
  }
  Rng scratch(0);
  MultiHeadQNet net(c, scratch);
  const auto& arrays = doc.at("arrays");
  read_set(arrays, net.params(), "");
  if (net.target_params()) {
    ParamSet target = *net.target_params();
    read_set(arrays, target, "target.");
    // restore θ̄ through the public sync path: load into online, sync, reload online
    ParamSet online = net.params();
    net.params().assign_values(target);
    net.sync_target();
    net.params().assign_values(online);
  }
  return net;
}

void save_checkpoint(const MultiHeadQNet& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(net).dump(1) << '\n';
}

MultiHeadQNet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read checkpoint " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(doc);
}

}  // namespace isqn
