#include <cmath>

#include "margop/simd/kernels.hpp"

namespace margop::simd::detail {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double abs_sum_scalar(const double* x, std::size_t n) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::fabs(x[i]);
  return s;
}

void scale_scalar(double alpha, double* x, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

constexpr KernelTable kScalarTable{dot_scalar, axpy_scalar, abs_sum_scalar, scale_scalar};

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalarTable; }

}  // namespace margop::simd::detail
