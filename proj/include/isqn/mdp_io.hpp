#pragma once

#include <filesystem>
#include <string>

#include "isqn/mdp.hpp"

namespace isqn {

/// JSON layout:
///   {"name": str, "gamma": num, "P": [S][A][S], "R": [S][A],
///    "terminal": [S] bools, "initial": [S] probabilities (optional, default state 0)}
TabularMdp mdp_from_json_text(const std::string& text);
std::string mdp_to_json_text(const TabularMdp& mdp);
TabularMdp load_mdp(const std::filesystem::path& path);

}  // namespace isqn
