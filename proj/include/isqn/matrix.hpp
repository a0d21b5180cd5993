#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace isqn {

/// Dense row-major matrix of doubles.
///
/// Construction from explicit data rejects non-finite entries. Element access
/// through operator() is unchecked; callers that write values are expected to
/// call `require_finite` at their own checkpoints.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix row_vector(std::span<const double> values);
  static Matrix column_vector(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;
  /// Throws NumericError mentioning `what` if any entry is NaN or infinite.
  void require_finite(std::string_view what) const;

  void fill(double value);

  friend bool operator==(const Matrix& a, const Matrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Kernels shared by the tape and the tape-free evaluators.

/// a (n×k) · b (k×m). Throws ConfigError on inner-dimension mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ · b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a · bᵀ without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
/// x += broadcast(bias) where bias is 1×cols.
void add_row_inplace(Matrix& x, const Matrix& bias);
void relu_inplace(Matrix& x);

/// Row-wise LayerNorm; writes normalized pre-affine values and 1/σ per row
/// when the optional outputs are given.
Matrix layernorm_rows(const Matrix& x, const Matrix& gain, const Matrix& bias, double eps,
                      Matrix* normalized = nullptr, std::vector<double>* inv_std = nullptr);

double dot(std::span<const double> a, std::span<const double> b);
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace isqn
