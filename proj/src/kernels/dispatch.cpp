#include <atomic>
#include <cstdlib>
#include <string>

#include <spdlog/spdlog.h>

#include "hardsel/errors.hpp"
#include "hardsel/kernels.hpp"

namespace hardsel::simd {
namespace {

const KernelTable* best_available() noexcept {
  if (const auto* t = detail::avx2_table()) return t;
  if (const auto* t = detail::neon_table()) return t;
  return &scalar_kernels();
}

const KernelTable* initial_table() noexcept {
  const char* forced = std::getenv("HARDSEL_SIMD");
  if (forced != nullptr && *forced != '\0') {
    const std::string name(forced);
    for (Backend b : {Backend::kScalar, Backend::kAvx2, Backend::kNeon}) {
      if (backend_name(b) == name) {
        if (const auto* t = kernels_for(b)) return t;
        spdlog::warn("HARDSEL_SIMD={} unavailable on this CPU; using default backend", name);
      }
    }
  }
  return best_available();
}

std::atomic<const KernelTable*>& active_slot() noexcept {
  static std::atomic<const KernelTable*> slot{initial_table()};
  return slot;
}

}  // namespace

std::string_view backend_name(Backend b) noexcept {
  switch (b) {
    case Backend::kScalar: return "scalar";
    case Backend::kAvx2: return "avx2";
    case Backend::kNeon: return "neon";
  }
  return "unknown";
}

const KernelTable* kernels_for(Backend b) noexcept {
  switch (b) {
    case Backend::kScalar: return &scalar_kernels();
    case Backend::kAvx2: return detail::avx2_table();
    case Backend::kNeon: return detail::neon_table();
  }
  return nullptr;
}

std::vector<Backend> available_backends() {
  std::vector<Backend> out;
  for (Backend b : {Backend::kScalar, Backend::kAvx2, Backend::kNeon}) {
    if (kernels_for(b) != nullptr) out.push_back(b);
  }
  return out;
}

const KernelTable& active() noexcept { return *active_slot().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  const KernelTable* t = kernels_for(b);
  if (t == nullptr) {
    throw ConfigError("SIMD backend '" + std::string(backend_name(b)) + "' is not available");
  }
  active_slot().store(t, std::memory_order_relaxed);
}

}  // namespace hardsel::simd
