#include "margop/linalg/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "margop/simd/kernels.hpp"

namespace margop {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, Vec data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw std::invalid_argument("Matrix: data has " + std::to_string(data_.size()) +
                                " entries, expected " + std::to_string(rows * cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Vec Matrix::column(std::size_t c) const {
  Vec out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Vec matvec(const Matrix& a, std::span<const double> x) {
  if (x.size() != a.cols()) throw std::invalid_argument("matvec: dimension mismatch");
  Vec y(a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) y[r] = simd::dot(a.row(r), x);
  return y;
}

Vec matvec_transposed(const Matrix& a, std::span<const double> x) {
  if (x.size() != a.rows()) throw std::invalid_argument("matvec_transposed: dimension mismatch");
  Vec y(a.cols(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    if (x[r] != 0.0) simd::axpy(x[r], a.row(r), y);
  }
  return y;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: dimension mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      double v = a(i, k);
      if (v != 0.0) simd::axpy(v, b.row(k), out);
    }
  }
  return c;
}

Matrix identity_minus(const Matrix& a, double scale) {
  if (a.rows() != a.cols()) throw std::invalid_argument("identity_minus: matrix is not square");
  Matrix m = a;
  simd::scale(-scale, m.data());
  for (std::size_t i = 0; i < m.rows(); ++i) m(i, i) += 1.0;
  return m;
}

double l1_norm(std::span<const double> x) { return simd::abs_sum(x); }

double max_abs(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::fabs(v));
  return m;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("max_abs_diff: size mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

double max_row_abs_sum(const Matrix& a) {
  double m = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) m = std::max(m, simd::abs_sum(a.row(r)));
  return m;
}

LuDecomposition::LuDecomposition(Matrix a, double singular_tolerance) : lu_(std::move(a)) {
  const std::size_t n = lu_.rows();
  if (n != lu_.cols()) throw std::invalid_argument("LuDecomposition: matrix is not square");
  perm_.resize(n);
  for (std::size_t i = 0; i < n; ++i) perm_[i] = i;
  const double scale = std::max(1.0, max_abs(lu_.data()));
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::fabs(lu_(k, k));
    for (std::size_t r = k + 1; r < n; ++r) {
      if (std::fabs(lu_(r, k)) > best) {
        best = std::fabs(lu_(r, k));
        p = r;
      }
    }
    if (best <= singular_tolerance * scale) {
      throw std::runtime_error("LuDecomposition: matrix is singular to working precision (pivot " +
                               std::to_string(k) + ")");
    }
    if (p != k) {
      std::swap_ranges(lu_.row(k).begin(), lu_.row(k).end(), lu_.row(p).begin());
      std::swap(perm_[k], perm_[p]);
    }
    const double pivot = lu_(k, k);
    auto pivot_tail = lu_.row(k).subspan(k + 1);
    for (std::size_t r = k + 1; r < n; ++r) {
      double f = lu_(r, k) / pivot;
      lu_(r, k) = f;
      if (f != 0.0) simd::axpy(-f, pivot_tail, lu_.row(r).subspan(k + 1));
    }
  }
}

Vec LuDecomposition::solve(std::span<const double> b) const {
  const std::size_t n = size();
  if (b.size() != n) throw std::invalid_argument("LuDecomposition::solve: size mismatch");
  Vec x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
  for (std::size_t i = 0; i < n; ++i) {
    x[i] -= simd::dot(lu_.row(i).first(i), std::span<const double>(x).first(i));
  }
  for (std::size_t i = n; i-- > 0;) {
    auto tail = lu_.row(i).subspan(i + 1);
    x[i] = (x[i] - simd::dot(tail, std::span<const double>(x).subspan(i + 1))) / lu_(i, i);
  }
  return x;
}

Vec LuDecomposition::solve_transposed(std::span<const double> b) const {
  // A = P^T L U, so A^T y = b becomes U^T L^T P y = b.
  const std::size_t n = size();
  if (b.size() != n) throw std::invalid_argument("LuDecomposition::solve_transposed: size mismatch");
  Vec z(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    z[i] /= lu_(i, i);
    if (z[i] != 0.0) simd::axpy(-z[i], lu_.row(i).subspan(i + 1), std::span<double>(z).subspan(i + 1));
  }
  for (std::size_t i = n; i-- > 0;) {
    double zi = z[i];
    if (zi != 0.0) simd::axpy(-zi, lu_.row(i).first(i), std::span<double>(z).first(i));
  }
  Vec y(n);
  for (std::size_t i = 0; i < n; ++i) y[perm_[i]] = z[i];
  return y;
}

Matrix LuDecomposition::inverse() const {
  const std::size_t n = size();
  // Rows of A^{-1} are solutions of A^T y = e_i, which keeps writes contiguous.
  Matrix inv(n, n);
  Vec e(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    e[i] = 1.0;
    Vec r = solve_transposed(e);
    std::copy(r.begin(), r.end(), inv.row(i).begin());
    e[i] = 0.0;
  }
  return inv;
}

}  // namespace margop
