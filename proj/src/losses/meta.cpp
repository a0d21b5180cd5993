#include "isqn/meta.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "isqn/errors.hpp"
#include "isqn/matrix.hpp"

namespace isqn {

MetaCoefficients::MetaCoefficients(std::size_t links, double meta_learning_rate)
    : logits_(links, 0.0), meta_lr_(meta_learning_rate) {
  if (links == 0) throw ConfigError("meta coefficients need at least one link");
  if (!(meta_learning_rate >= 0.0) || !std::isfinite(meta_learning_rate)) {
    throw ConfigError("meta learning rate must be a finite non-negative number");
  }
}

void MetaCoefficients::set_logits(std::vector<double> logits) {
  if (logits.size() != logits_.size()) throw ConfigError("meta logit count mismatch");
  for (double z : logits) {
    if (!std::isfinite(z)) throw NumericError("meta logit is not finite");
  }
  logits_ = std::move(logits);
}

std::vector<double> MetaCoefficients::alphas() const {
  const double top = *std::max_element(logits_.begin(), logits_.end());
  std::vector<double> a(logits_.size());
  double total = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) total += a[k] = std::exp(logits_[k] - top);
  for (double& v : a) v /= total;
  return a;
}

void MetaCoefficients::descend(std::span<const double> logit_gradient) {
  if (logit_gradient.size() != logits_.size()) throw ConfigError("meta gradient size mismatch");
  std::vector<double> next = logits_;
  for (std::size_t k = 0; k < next.size(); ++k) next[k] -= meta_lr_ * logit_gradient[k];
  set_logits(std::move(next));
}

namespace {

std::vector<Gradients> per_link_gradients(const MultiHeadQNet& net, const Batch& batch,
                                          const LossConfig& config) {
  LossGraph graph(net, batch, config);
  const std::size_t links = link_count(net);
  std::vector<Gradients> grads;
  grads.reserve(links);
  for (std::size_t k = 1; k <= links; ++k) grads.push_back(graph.gradients(link_loss(graph, k)));
  return grads;
}

double dot_over(const Gradients& a, const Gradients& b, const std::vector<ParamId>& ids) {
  double acc = 0.0;
  for (ParamId id : ids) acc += dot(a[id].data(), b[id].data());
  return acc;
}

}  // namespace

MetaGradient meta_gradient(const MetaCoefficients& coeffs, const MultiHeadQNet& net,
                           const Batch& batch, const LossConfig& config, double lr_theta) {
  if (net.mode() != NetMode::IteratedShared) {
    throw UsageError("meta-gradients are defined for iterated shared networks");
  }
  if (config.weighting != Weighting::Meta) throw ConfigError("meta update requires meta weighting");
  const std::size_t links = link_count(net);
  if (coeffs.size() != links) throw ConfigError("meta coefficient count does not match K");
  if (!(lr_theta > 0.0)) throw ConfigError("inner learning rate must be positive");

  const std::vector<double> alpha = coeffs.alphas();
  const std::vector<Gradients> g = per_link_gradients(net, batch, config);

  Gradients step = zeros_like(net.params());
  for (std::size_t k = 0; k < links; ++k) {
    for (std::size_t id = 0; id < step.size(); ++id) {
      Matrix& s = step[id];
      const Matrix& gk = g[k][id];
      for (std::size_t i = 0; i < s.size(); ++i) s.data()[i] += alpha[k] * gk.data()[i];
    }
  }
  MultiHeadQNet stepped = net;
  sgd_step(stepped.params(), step, lr_theta);
  const std::vector<Gradients> h = per_link_gradients(stepped, batch, config);

  Gradients shared = zeros_like(net.params());
  for (const Gradients& hk : h) {
    for (std::size_t id = 0; id < shared.size(); ++id) {
      Matrix& s = shared[id];
      for (std::size_t i = 0; i < s.size(); ++i) s.data()[i] += hk[id].data()[i];
    }
  }

  const std::vector<ParamId> torso = net.torso_param_ids();
  MetaGradient out;
  out.alpha.resize(links);
  for (std::size_t k = 0; k < links; ++k) {
    const std::vector<ParamId> head = net.head_param_ids(k + 1);
    const double head_align = dot_over(h[k], g[k], head);
    const double torso_align = dot_over(shared, g[k], torso);
    out.alpha[k] = -lr_theta * (head_align + torso_align);
  }
  out.logits.assign(links, 0.0);
  for (std::size_t j = 0; j < links; ++j) {
    for (std::size_t k = 0; k < links; ++k) {
      const double jac = alpha[k] * ((k == j ? 1.0 : 0.0) - alpha[j]);
      out.logits[j] += out.alpha[k] * jac;
    }
  }
  return out;
}

MetaGradient meta_update(MetaCoefficients& coeffs, const MultiHeadQNet& net, const Batch& batch,
                         const LossConfig& config, double lr_theta, OptimizerKind inner) {
  if (inner != OptimizerKind::Sgd) {
    throw ConfigError("meta-gradient weighting requires an SGD inner optimizer");
  }
  MetaGradient grad = meta_gradient(coeffs, net, batch, config, lr_theta);
  coeffs.descend(grad.logits);
  return grad;
}

}  // namespace isqn
