#include <atomic>
#include <cstdlib>
#include <string_view>

#include "kernels_impl.hpp"

namespace dppnet::simd {
namespace {

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(DPPNET_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::kNeon:
#if defined(DPPNET_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable* best_table() {
  const char* env = std::getenv("DPPNET_SIMD");
  if (env != nullptr && std::string_view(env) == "scalar") return &detail::kScalarTable;
  if (const KernelTable* t = kernels_for(Isa::kAvx2)) return t;
  if (const KernelTable* t = kernels_for(Isa::kNeon)) return t;
  return &detail::kScalarTable;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{best_table()};
  return table;
}

}  // namespace

std::string_view to_string(Isa isa) {
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

const KernelTable& scalar_kernels() { return detail::kScalarTable; }

const KernelTable* kernels_for(Isa isa) {
  if (!cpu_supports(isa)) return nullptr;
  switch (isa) {
    case Isa::kScalar:
      return &detail::kScalarTable;
    case Isa::kAvx2:
#if defined(DPPNET_HAVE_AVX2)
      return &detail::kAvx2Table;
#else
      return nullptr;
#endif
    case Isa::kNeon:
#if defined(DPPNET_HAVE_NEON)
      return &detail::kNeonTable;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

Isa active_isa() { return active().isa; }

bool force_isa(Isa isa) {
  const KernelTable* t = kernels_for(isa);
  if (t == nullptr) return false;
  current().store(t, std::memory_order_relaxed);
  return true;
}

void reset_isa() { current().store(best_table(), std::memory_order_relaxed); }

}  // namespace dppnet::simd
