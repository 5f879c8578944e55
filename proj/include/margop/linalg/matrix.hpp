#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace margop {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, Vec data);  // throws on size mismatch

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }

  Vec column(std::size_t c) const;

  const Vec& data() const noexcept { return data_; }
  Vec& data() noexcept { return data_; }

  Matrix transposed() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vec data_;
};

// y = A x
Vec matvec(const Matrix& a, std::span<const double> x);
// y = A^T x
Vec matvec_transposed(const Matrix& a, std::span<const double> x);
Matrix matmul(const Matrix& a, const Matrix& b);

// I - scale * A for square A.
Matrix identity_minus(const Matrix& a, double scale);

double l1_norm(std::span<const double> x);
double max_abs(std::span<const double> x);
double max_abs_diff(std::span<const double> a, std::span<const double> b);
double max_row_abs_sum(const Matrix& a);

// LU factorisation with partial pivoting. Throws std::runtime_error when a
// pivot falls below the singularity tolerance relative to the matrix scale.
class LuDecomposition {
 public:
  explicit LuDecomposition(Matrix a, double singular_tolerance = 1e-13);

  std::size_t size() const noexcept { return lu_.rows(); }
  Vec solve(std::span<const double> b) const;             // A x = b
  Vec solve_transposed(std::span<const double> b) const;  // A^T x = b
  Matrix inverse() const;

 private:
  Matrix lu_;
  std::vector<std::size_t> perm_;
};

}  // namespace margop
