#pragma once

#include <cstddef>
#include <string_view>

#include "isqn/mdp.hpp"

namespace isqn {

inline constexpr std::size_t kDefaultHorizon = 200;

/// Corridor of `length` states. Both ends are terminal: stepping left into
/// state 0 pays 0.01, stepping right into the last state pays 1. Episodes
/// start in state 1. With probability `slip` the chosen direction flips.
TabularMdp make_chain(std::size_t length = 15, double slip = 0.0, double gamma = 0.99);

/// size×size grid starting in the top-left corner. The bottom-right corner
/// pays 1 and the cell two steps right of the start pays 0.1; both are
/// terminal. Actions are up, down, left, right; moves into walls stay put.
/// With probability `slip` a uniformly random action replaces the chosen one.
TabularMdp make_gridworld(std::size_t size = 5, double slip = 0.0, double gamma = 0.99);

/// "chain" or "gridworld" with default parameters.
TabularMdp make_stock_env(std::string_view name);

}  // namespace isqn
