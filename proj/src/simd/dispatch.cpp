#include <atomic>
#include <cassert>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "margop/simd/kernels.hpp"

namespace margop::simd {
namespace {

bool cpu_supports(Backend backend) noexcept {
  switch (backend) {
    case Backend::kScalar:
      return true;
    case Backend::kAvx2:
#if defined(__x86_64__) || defined(__i386__)
      __builtin_cpu_init();
      return detail::avx2_table() != nullptr && __builtin_cpu_supports("avx2") &&
             __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::kNeon:
      return detail::neon_table() != nullptr;
  }
  return false;
}

const KernelTable* table_of(Backend backend) noexcept {
  switch (backend) {
    case Backend::kScalar: return &detail::scalar_table();
    case Backend::kAvx2: return detail::avx2_table();
    case Backend::kNeon: return detail::neon_table();
  }
  return nullptr;
}

Backend pick_default() noexcept {
  if (const char* env = std::getenv("MARGOP_SIMD")) {
    try {
      Backend requested = parse_backend(env);
      if (cpu_supports(requested)) return requested;
    } catch (const std::invalid_argument&) {
    }
  }
  if (cpu_supports(Backend::kAvx2)) return Backend::kAvx2;
  if (cpu_supports(Backend::kNeon)) return Backend::kNeon;
  return Backend::kScalar;
}

struct State {
  std::atomic<Backend> backend;
  std::atomic<const KernelTable*> table;
  State() {
    Backend b = pick_default();
    backend.store(b);
    table.store(table_of(b));
  }
};

State& state() {
  static State s;
  return s;
}

const KernelTable& active() noexcept { return *state().table.load(std::memory_order_relaxed); }

}  // namespace

std::string_view backend_name(Backend backend) noexcept {
  switch (backend) {
    case Backend::kScalar: return "scalar";
    case Backend::kAvx2: return "avx2";
    case Backend::kNeon: return "neon";
  }
  return "unknown";
}

Backend parse_backend(std::string_view name) {
  if (name == "scalar") return Backend::kScalar;
  if (name == "avx2") return Backend::kAvx2;
  if (name == "neon") return Backend::kNeon;
  throw std::invalid_argument("unknown SIMD backend '" + std::string(name) + "'");
}

bool backend_available(Backend backend) noexcept { return cpu_supports(backend); }

Backend active_backend() noexcept { return state().backend.load(); }

void set_backend(Backend backend) {
  if (!cpu_supports(backend)) {
    throw std::invalid_argument("SIMD backend '" + std::string(backend_name(backend)) +
                                "' is not available on this machine");
  }
  state().table.store(table_of(backend));
  state().backend.store(backend);
}

const KernelTable& kernels_for(Backend backend) {
  if (!cpu_supports(backend)) {
    throw std::invalid_argument("SIMD backend '" + std::string(backend_name(backend)) +
                                "' is not available on this machine");
  }
  return *table_of(backend);
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  assert(a.size() == b.size());
  return active().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
  assert(x.size() == y.size());
  active().axpy(alpha, x.data(), y.data(), x.size());
}

double abs_sum(std::span<const double> x) noexcept { return active().abs_sum(x.data(), x.size()); }

void scale(double alpha, std::span<double> x) noexcept { active().scale(alpha, x.data(), x.size()); }

}  // namespace margop::simd
