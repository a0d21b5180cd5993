#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "isqn/matrix.hpp"

namespace isqn {

using ParamId = std::size_t;

/// Named collection of parameter arrays. Frozen entries are skipped by the
/// optimizers but still take part in forward passes.
class ParamSet {
 public:
  ParamId add(std::string name, Matrix value, bool frozen = false);

  std::size_t size() const { return values_.size(); }
  /// Total number of scalars across all arrays.
  std::size_t scalar_count() const;

  Matrix& operator[](ParamId id) { return values_[id]; }
  const Matrix& operator[](ParamId id) const { return values_[id]; }
  const std::string& name(ParamId id) const { return names_[id]; }
  std::optional<ParamId> find(std::string_view name) const;

  bool frozen(ParamId id) const { return frozen_[id]; }
  void set_frozen(ParamId id, bool frozen) { frozen_[id] = frozen; }

  /// Copies values from `other`, which must have the same layout.
  void assign_values(const ParamSet& other);

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
  std::vector<bool> frozen_;
};

/// One gradient array per parameter of the ParamSet it was computed for.
using Gradients = std::vector<Matrix>;

Gradients zeros_like(const ParamSet& params);
/// Sum of squares of every gradient entry.
double squared_norm(const Gradients& grads);
/// Flattens the selected arrays into a single vector, in the order given.
std::vector<double> flatten(const Gradients& grads, const std::vector<ParamId>& ids);

}  // namespace isqn
