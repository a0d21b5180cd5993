#pragma once

#include <filesystem>

#include "json.hpp"
#include "isqn/qnet.hpp"

namespace isqn {

inline constexpr int kCheckpointVersion = 1;

/// Flat key → array document:
///   {"format": "isqn-checkpoint", "version": 1, "config": {...},
///    "arrays": {"torso.L0.W": {"rows": r, "cols": c, "data": [...]}, ...}}
/// Online keys are "torso.L{i}.W|b|ln.gain|ln.bias" and "head.{k}.W|b"; the
/// TargetBased frozen copy uses the same keys prefixed with "target.".
nlohmann::json checkpoint_to_json(const MultiHeadQNet& net);
MultiHeadQNet checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const MultiHeadQNet& net, const std::filesystem::path& path);
MultiHeadQNet load_checkpoint(const std::filesystem::path& path);

}  // namespace isqn
