#include "isqn/stock.hpp"

#include <string>
#include <vector>

#include "isqn/errors.hpp"

namespace isqn {

namespace {

void require_slip(double slip) {
  if (!(slip >= 0.0 && slip <= 1.0)) throw ConfigError("slip probability must lie in [0, 1]");
}

}  // namespace

TabularMdp make_chain(std::size_t length, double slip, double gamma) {
  if (length < 3) throw ConfigError("chain needs at least 3 states");
  require_slip(slip);
  const std::size_t S = length, A = 2;
  const std::size_t goal = S - 1;
  std::vector<double> P(S * A * S, 0.0), R(S * A, 0.0);
  std::vector<bool> terminal(S, false);
  terminal[0] = terminal[goal] = true;
  auto p = [&](std::size_t s, std::size_t a, std::size_t n) -> double& { return P[(s * A + a) * S + n]; };
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      if (terminal[s]) {
        p(s, a, s) = 1.0;
        continue;
      }
      const std::size_t left = s - 1, right = s + 1;
      const std::size_t intended = a == 0 ? left : right;
      const std::size_t flipped = a == 0 ? right : left;
      p(s, a, intended) += 1.0 - slip;
      p(s, a, flipped) += slip;
      auto pays = [&](std::size_t n) { return n == 0 ? 0.01 : n == goal ? 1.0 : 0.0; };
      R[s * A + a] = (1.0 - slip) * pays(intended) + slip * pays(flipped);
    }
  }
  std::vector<double> initial(S, 0.0);
  initial[1] = 1.0;
  return TabularMdp("chain", S, A, std::move(P), std::move(R), std::move(terminal), gamma,
                    std::move(initial));
}

TabularMdp make_gridworld(std::size_t size, double slip, double gamma) {
  if (size < 3) throw ConfigError("gridworld needs a side of at least 3");
  require_slip(slip);
  const std::size_t S = size * size, A = 4;
  const std::size_t goal = S - 1, distractor = 2;
  std::vector<double> P(S * A * S, 0.0), R(S * A, 0.0);
  std::vector<bool> terminal(S, false);
  terminal[goal] = terminal[distractor] = true;
  auto move = [&](std::size_t s, std::size_t a) {
    std::size_t r = s / size, c = s % size;
    switch (a) {
      case 0: if (r > 0) --r; break;
      case 1: if (r + 1 < size) ++r; break;
      case 2: if (c > 0) --c; break;
      default: if (c + 1 < size) ++c; break;
    }
    return r * size + c;
  };
  auto pays = [&](std::size_t n) { return n == goal ? 1.0 : n == distractor ? 0.1 : 0.0; };
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      double* row = &P[(s * A + a) * S];
      if (terminal[s]) {
        row[s] = 1.0;
        continue;
      }
      for (std::size_t b = 0; b < A; ++b) {
        const double prob = (b == a ? 1.0 - slip : 0.0) + slip / static_cast<double>(A);
        if (prob == 0.0) continue;
        const std::size_t n = move(s, b);
        row[n] += prob;
        R[s * A + a] += prob * pays(n);
      }
    }
  }
  std::vector<double> initial(S, 0.0);
  initial[0] = 1.0;
  return TabularMdp("gridworld", S, A, std::move(P), std::move(R), std::move(terminal), gamma,
                    std::move(initial));
}

TabularMdp make_stock_env(std::string_view name) {
  if (name == "chain") return make_chain();
  if (name == "gridworld") return make_gridworld();
  throw ConfigError("unknown environment '" + std::string(name) + "' (expected chain or gridworld)");
}

}  // namespace isqn
