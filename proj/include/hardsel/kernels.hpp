#pragma once

// Dense double-precision kernels used by the clustering, classifier and
// similarity inner loops. A scalar reference implementation always exists;
// vectorized variants (AVX2+FMA on x86-64, NEON on AArch64) are chosen at
// runtime when the CPU supports them. Set HARDSEL_SIMD=scalar|avx2|neon to
// force a backend.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace hardsel::simd {

enum class Backend { kScalar, kAvx2, kNeon };

std::string_view backend_name(Backend b) noexcept;

struct KernelTable {
  Backend backend;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

const KernelTable& scalar_kernels() noexcept;

/// Table for `b`, or nullptr when not compiled in or unsupported by the CPU.
const KernelTable* kernels_for(Backend b) noexcept;

std::vector<Backend> available_backends();

/// The table every free function below dispatches through.
const KernelTable& active() noexcept;

/// Throws ConfigError when `b` is unavailable on this machine.
void set_backend(Backend b);

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  return active().dot(a.data(), b.data(), a.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  return active().squared_distance(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

namespace detail {
const KernelTable* avx2_table() noexcept;
const KernelTable* neon_table() noexcept;
}  // namespace detail

}  // namespace hardsel::simd
