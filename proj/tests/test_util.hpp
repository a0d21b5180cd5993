#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "isqn/params.hpp"
#include "isqn/rng.hpp"

namespace isqn::testing {

/// Central finite differences of `f` with respect to every entry of `params`.
inline Gradients finite_difference(ParamSet& params, const std::function<double()>& f,
                                   double h = 1e-5) {
  Gradients g = zeros_like(params);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto data = params[i].data();
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double keep = data[j];
      data[j] = keep + h;
      const double up = f();
      data[j] = keep - h;
      const double down = f();
      data[j] = keep;
      g[i].data()[j] = (up - down) / (2.0 * h);
    }
  }
  return g;
}

/// max |a−b| / max(floor, |a|, |b|) over all entries.
inline double max_relative_error(const Gradients& a, const Gradients& b, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) {
      const double x = a[i].data()[j], y = b[i].data()[j];
      const double scale = std::max({floor, std::abs(x), std::abs(y)});
      worst = std::max(worst, std::abs(x - y) / scale);
    }
  return worst;
}

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

}  // namespace isqn::testing
