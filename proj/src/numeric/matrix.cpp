#include "isqn/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "isqn/errors.hpp"

namespace isqn {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  if (!std::isfinite(fill)) throw NumericError("matrix fill value is not finite");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ConfigError("matrix data length " + std::to_string(data_.size()) + " != " +
                      std::to_string(rows) + "x" + std::to_string(cols));
  }
  require_finite("matrix construction");
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ConfigError("ragged rows in Matrix::from_rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

Matrix Matrix::row_vector(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::column_vector(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Matrix::require_finite(std::string_view what) const {
  if (!all_finite()) throw NumericError("non-finite value in " + std::string(what));
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ConfigError("matmul shape mismatch: " + std::to_string(a.rows()) + "x" +
                      std::to_string(a.cols()) + " * " + std::to_string(b.rows()) + "x" +
                      std::to_string(b.cols()));
  }
  Matrix out(a.rows(), b.cols());
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double* o = out.row(i).data();
    const double* ar = a.row(i).data();
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ar[p];
      const double* br = b.row(p).data();
      for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ConfigError("matmul_tn shape mismatch");
  Matrix out(a.cols(), b.cols());
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t r = 0; r < n; ++r) {
    const double* ar = a.row(r).data();
    const double* br = b.row(r).data();
    for (std::size_t i = 0; i < k; ++i) {
      const double av = ar[i];
      double* o = out.row(i).data();
      for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ConfigError("matmul_nt shape mismatch");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a.row(i), b.row(j));
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

void add_row_inplace(Matrix& x, const Matrix& bias) {
  if (bias.rows() != 1 || bias.cols() != x.cols()) throw ConfigError("bias shape mismatch");
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double* r = x.row(i).data();
    for (std::size_t j = 0; j < x.cols(); ++j) r[j] += bias(0, j);
  }
}

void relu_inplace(Matrix& x) {
  for (double& v : x.data()) v = v > 0.0 ? v : 0.0;
}

Matrix layernorm_rows(const Matrix& x, const Matrix& gain, const Matrix& bias, double eps,
                      Matrix* normalized, std::vector<double>* inv_std) {
  if (gain.rows() != 1 || gain.cols() != x.cols() || !gain.same_shape(bias)) {
    throw ConfigError("layernorm parameter shape mismatch");
  }
  const std::size_t n = x.cols();
  Matrix out(x.rows(), n);
  if (normalized) *normalized = Matrix(x.rows(), n);
  if (inv_std) inv_std->assign(x.rows(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto r = x.row(i);
    double mu = 0.0;
    for (double v : r) mu += v;
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (double v : r) var += (v - mu) * (v - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      const double xh = (r[j] - mu) * is;
      if (normalized) (*normalized)(i, j) = xh;
      out(i, j) = gain(0, j) * xh + bias(0, j);
    }
    if (inv_std) (*inv_std)[i] = is;
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw ConfigError("max_abs_diff shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace isqn
