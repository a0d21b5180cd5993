#include "isqn/mdp_io.hpp"

#include <fstream>
#include <sstream>

#include "isqn/errors.hpp"
#include "json.hpp"

namespace isqn {

using nlohmann::json;

namespace {

const json& field(const json& doc, const char* key) {
  if (!doc.contains(key)) throw ConfigError(std::string("MDP document is missing '") + key + "'");
  return doc.at(key);
}

void require_array(const json& node, std::size_t size, const std::string& what) {
  if (!node.is_array() || node.size() != size) {
    throw ConfigError(what + " must be an array of length " + std::to_string(size));
  }
}

double number(const json& node, const std::string& what) {
  if (!node.is_number()) throw ConfigError(what + " must be a number");
  return node.get<double>();
}

}  // namespace

TabularMdp mdp_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("MDP document is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("MDP document must be a JSON object");
  const json& P = field(doc, "P");
  if (!P.is_array() || P.empty() || !P[0].is_array() || P[0].empty()) {
    throw ConfigError("P must be a non-empty [S][A][S] array");
  }
  const std::size_t S = P.size(), A = P[0].size();
  std::vector<double> transitions;
  transitions.reserve(S * A * S);
  for (std::size_t s = 0; s < S; ++s) {
    require_array(P[s], A, "P[" + std::to_string(s) + "]");
    for (std::size_t a = 0; a < A; ++a) {
      const std::string where = "P[" + std::to_string(s) + "][" + std::to_string(a) + "]";
      require_array(P[s][a], S, where);
      for (const json& v : P[s][a]) transitions.push_back(number(v, where));
    }
  }
  const json& R = field(doc, "R");
  require_array(R, S, "R");
  std::vector<double> rewards;
  for (std::size_t s = 0; s < S; ++s) {
    const std::string where = "R[" + std::to_string(s) + "]";
    require_array(R[s], A, where);
    for (const json& v : R[s]) rewards.push_back(number(v, where));
  }
  const json& T = field(doc, "terminal");
  require_array(T, S, "terminal");
  std::vector<bool> terminal;
  for (const json& v : T) {
    if (!v.is_boolean()) throw ConfigError("terminal entries must be booleans");
    terminal.push_back(v.get<bool>());
  }
  const double gamma = number(field(doc, "gamma"), "gamma");
  std::vector<double> initial(S, 0.0);
  if (doc.contains("initial")) {
    require_array(doc["initial"], S, "initial");
    for (std::size_t s = 0; s < S; ++s) initial[s] = number(doc["initial"][s], "initial");
  } else {
    initial[0] = 1.0;
  }
  std::string name = "custom";
  if (doc.contains("name")) {
    if (!doc["name"].is_string()) throw ConfigError("name must be a string");
    name = doc["name"].get<std::string>();
  }
  return TabularMdp(std::move(name), S, A, std::move(transitions), std::move(rewards),
                    std::move(terminal), gamma, std::move(initial));
}

std::string mdp_to_json_text(const TabularMdp& mdp) {
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  json doc;
  doc["name"] = mdp.name();
  doc["gamma"] = mdp.gamma();
  json P = json::array(), R = json::array(), T = json::array();
  for (std::size_t s = 0; s < S; ++s) {
    json ps = json::array(), rs = json::array();
    for (std::size_t a = 0; a < A; ++a) {
      auto row = mdp.transition(s, a);
      ps.push_back(std::vector<double>(row.begin(), row.end()));
      rs.push_back(mdp.reward(s, a));
    }
    P.push_back(std::move(ps));
    R.push_back(std::move(rs));
    T.push_back(static_cast<bool>(mdp.terminal(s)));
  }
  doc["P"] = std::move(P);
  doc["R"] = std::move(R);
  doc["terminal"] = std::move(T);
  doc["initial"] = std::vector<double>(mdp.initial().begin(), mdp.initial().end());
  return doc.dump(2);
}

TabularMdp load_mdp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read MDP file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return mdp_from_json_text(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace isqn
