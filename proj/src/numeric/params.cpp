#include "isqn/params.hpp"

#include "isqn/errors.hpp"

namespace isqn {

ParamId ParamSet::add(std::string name, Matrix value, bool frozen) {
  if (find(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  frozen_.push_back(frozen);
  return values_.size() - 1;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

std::optional<ParamId> ParamSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  return std::nullopt;
}

void ParamSet::assign_values(const ParamSet& other) {
  if (other.size() != size()) throw UsageError("ParamSet layout mismatch");
  for (std::size_t i = 0; i < size(); ++i) {
    if (!values_[i].same_shape(other.values_[i])) throw UsageError("ParamSet shape mismatch");
    values_[i] = other.values_[i];
  }
}

Gradients zeros_like(const ParamSet& params) {
  Gradients g;
  g.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    g.emplace_back(params[i].rows(), params[i].cols());
  return g;
}

double squared_norm(const Gradients& grads) {
  double s = 0.0;
  for (const auto& g : grads)
    for (double v : g.data()) s += v * v;
  return s;
}

std::vector<double> flatten(const Gradients& grads, const std::vector<ParamId>& ids) {
  std::vector<double> out;
  for (ParamId id : ids) out.insert(out.end(), grads.at(id).data().begin(), grads.at(id).data().end());
  return out;
}

}  // namespace isqn
