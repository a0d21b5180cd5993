#include "isqn/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "isqn/errors.hpp"

namespace isqn {

double target_churn(const MultiHeadQNet& before, const MultiHeadQNet& after, const Batch& batch,
                    const LossConfig& config, ChurnTarget which) {
  const std::size_t links = link_count(after);
  if (link_count(before) != links || before.mode() != after.mode()) {
    throw ConfigError("churn compares networks of different shapes");
  }
  const std::size_t first = which == ChurnTarget::Freshest ? links : 1;
  double total = 0.0;
  for (std::size_t k = first; k <= links; ++k) {
    const Matrix y0 = regression_targets(before, batch, config, k);
    const Matrix y1 = regression_targets(after, batch, config, k);
    double acc = 0.0;
    for (std::size_t b = 0; b < y0.rows(); ++b) acc += std::abs(y1(b, 0) - y0(b, 0));
    total += acc / static_cast<double>(y0.rows());
  }
  return total / static_cast<double>(links - first + 1);
}

void ChurnAccumulator::add(double churn) {
  total_ += churn;
  ++steps_;
}

void ChurnAccumulator::reset() {
  total_ = 0.0;
  steps_ = 0;
}

double ChurnAccumulator::period_mean() const {
  return steps_ == 0 ? 0.0 : total_ / static_cast<double>(steps_);
}

double grad_cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("gradient cosine needs equal-length vectors");
  const double na = std::sqrt(dot(a, a)), nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

std::vector<double> singular_values(const Matrix& m) {
  // Rotate column pairs of a tall copy until all columns are orthogonal; the
  // column norms are then the singular values.
  Matrix a = m.rows() >= m.cols() ? m : transpose(m);
  const std::size_t rows = a.rows(), cols = a.cols();
  constexpr double kEps = 1e-15;
  for (int sweep = 0; sweep < 100; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < cols; ++p) {
      for (std::size_t q = p + 1; q < cols; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
          alpha += a(i, p) * a(i, p);
          beta += a(i, q) * a(i, q);
          gamma += a(i, p) * a(i, q);
        }
        if (std::abs(gamma) <= kEps * std::sqrt(alpha * beta) || gamma == 0.0) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t), s = c * t;
        for (std::size_t i = 0; i < rows; ++i) {
          const double x = a(i, p), y = a(i, q);
          a(i, p) = c * x - s * y;
          a(i, q) = s * x + c * y;
        }
      }
    }
    if (!rotated) break;
  }
  std::vector<double> sigma(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < rows; ++i) acc += a(i, j) * a(i, j);
    sigma[j] = std::sqrt(acc);
  }
  std::sort(sigma.begin(), sigma.end(), std::greater<>());
  return sigma;
}

SrankResult srank_from_singular_values(std::span<const double> sigma, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("srank delta must lie in (0, 1)");
  const double total = std::accumulate(sigma.begin(), sigma.end(), 0.0);
  if (total == 0.0) return {0, true};
  double acc = 0.0;
  for (std::size_t k = 0; k < sigma.size(); ++k) {
    acc += sigma[k];
    if (acc / total >= 1.0 - delta) return {k + 1, false};
  }
  return {sigma.size(), false};
}

SrankResult srank(const Matrix& features, double delta) {
  return srank_from_singular_values(singular_values(features), delta);
}

double dormant_fraction(std::span<const Matrix> activations, double tau) {
  if (!(tau >= 0.0)) throw ConfigError("dormant threshold must be non-negative");
  std::size_t dormant = 0, total = 0;
  for (const Matrix& layer : activations) {
    if (layer.rows() == 0 || layer.cols() == 0) continue;
    std::vector<double> score(layer.cols(), 0.0);
    for (std::size_t i = 0; i < layer.rows(); ++i)
      for (std::size_t j = 0; j < layer.cols(); ++j) score[j] += std::abs(layer(i, j));
    const double layer_mean =
        std::accumulate(score.begin(), score.end(), 0.0) / static_cast<double>(layer.cols());
    for (double s : score) {
      if (layer_mean == 0.0 || s / layer_mean <= tau) ++dormant;
    }
    total += layer.cols();
  }
  return total == 0 ? 0.0 : static_cast<double>(dormant) / static_cast<double>(total);
}

}  // namespace isqn
