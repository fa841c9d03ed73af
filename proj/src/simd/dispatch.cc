#include <atomic>
#include <cstdlib>
#include <cstring>

#include "oshield/simd/kernels.h"

namespace oshield::simd {
namespace {

const KernelTable* best_available() {
  // OSHIELD_SIMD=scalar pins the reference kernels (useful when comparing runs
  // across machines).
  if (const char* env = std::getenv("OSHIELD_SIMD");
      env != nullptr && std::strcmp(env, "scalar") == 0) {
    return &scalar_kernels();
  }
  if (const KernelTable* t = avx2_kernels()) return t;
  if (const KernelTable* t = neon_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{best_available()};
  return current;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
    case Isa::kNeon:
      return "neon";
  }
  return "unknown";
}

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

Isa active_isa() { return active().isa; }

bool force_isa(Isa isa) {
  const KernelTable* table = nullptr;
  switch (isa) {
    case Isa::kScalar:
      table = &scalar_kernels();
      break;
    case Isa::kAvx2:
      table = avx2_kernels();
      break;
    case Isa::kNeon:
      table = neon_kernels();
      break;
  }
  if (table == nullptr) return false;
  slot().store(table, std::memory_order_release);
  return true;
}

void reset_isa() { slot().store(best_available(), std::memory_order_release); }

}  // namespace oshield::simd
