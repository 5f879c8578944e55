#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Dense double-precision kernels with a scalar reference implementation and
// vectorised variants chosen at runtime.
namespace margop::simd {

enum class Backend { kScalar, kAvx2, kNeon };

std::string_view backend_name(Backend backend) noexcept;

// True when the backend was compiled in and the running CPU supports it.
bool backend_available(Backend backend) noexcept;

// Backend picked on first use: MARGOP_SIMD=scalar|avx2|neon if set and
// available, otherwise the widest supported one.
Backend active_backend() noexcept;

// Throws std::invalid_argument if the backend is unavailable.
void set_backend(Backend backend);

// Parses "scalar", "avx2" or "neon"; throws std::invalid_argument otherwise.
Backend parse_backend(std::string_view name);

// All span pairs must have equal length; this is checked in debug builds only.
double dot(std::span<const double> a, std::span<const double> b) noexcept;
void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept;
double abs_sum(std::span<const double> x) noexcept;
void scale(double alpha, std::span<double> x) noexcept;

struct KernelTable {
  double (*dot)(const double*, const double*, std::size_t) noexcept;
  void (*axpy)(double, const double*, double*, std::size_t) noexcept;
  double (*abs_sum)(const double*, std::size_t) noexcept;
  void (*scale)(double, double*, std::size_t) noexcept;
};

// Direct access to one backend's kernels, used by equivalence tests.
// Throws std::invalid_argument if the backend is unavailable.
const KernelTable& kernels_for(Backend backend);

namespace detail {
const KernelTable& scalar_table() noexcept;
const KernelTable* avx2_table() noexcept;  // nullptr when not compiled in
const KernelTable* neon_table() noexcept;
}  // namespace detail

}  // namespace margop::simd
