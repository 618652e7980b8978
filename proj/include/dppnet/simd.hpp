#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Inner-loop kernels (double precision unless suffixed _f32). Every kernel has a scalar reference
// implementation; vector variants (AVX2+FMA on x86-64, NEON on aarch64) are
// picked once at startup from the running CPU. Vector variants reassociate
// sums, so results agree with the scalar path to rounding, not bit-exactly.
namespace dppnet::simd {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view to_string(Isa isa);

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // y[r] = bias[r] + dot(w[r, :], x) for a row-major rows x cols matrix.
  // bias may be null.
  void (*gemv)(const double* w, std::size_t rows, std::size_t cols,
               const double* x, const double* bias, double* y);
  // y[i] *= x[i]
  void (*mul_inplace)(const double* x, double* y, std::size_t n);
  // Batched layer on transposed weights (wt is cols x rows, row-major):
  // y[b * rows + r] = bias[r] + sum_c x[b * cols + c] * wt[c * rows + r] for
  // b < batch. bias may be null.
  void (*gemm)(const double* wt, std::size_t rows, std::size_t cols, const double* x,
               std::size_t batch, const double* bias, double* y);
  // Single-precision gemm and axpy for batched inference.
  void (*gemm_f32)(const float* wt, std::size_t rows, std::size_t cols, const float* x,
                   std::size_t batch, const float* bias, float* y);
  void (*axpy_f32)(float alpha, const float* x, float* y, std::size_t n);
};

const KernelTable& scalar_kernels();
// Null when the ISA is not compiled in or not supported by this CPU.
const KernelTable* kernels_for(Isa isa);

// The table currently used by the library.
const KernelTable& active();
Isa active_isa();
// Returns false (and leaves the selection unchanged) if the ISA is unavailable.
// Intended for tests and benchmarks; not thread-safe against concurrent kernel use.
bool force_isa(Isa isa);
// Restores the best ISA for this CPU, honoring DPPNET_SIMD=scalar.
void reset_isa();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}

}  // namespace dppnet::simd
