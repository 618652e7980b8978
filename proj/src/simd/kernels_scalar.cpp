#include "kernels_impl.hpp"

namespace dppnet::simd::detail {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double squared_distance_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

void gemv_scalar(const double* w, std::size_t rows, std::size_t cols,
                 const double* x, const double* bias, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    y[r] = (bias ? bias[r] : 0.0) + dot_scalar(w + r * cols, x, cols);
  }
}

void mul_inplace_scalar(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= x[i];
}

void gemm_scalar(const double* wt, std::size_t rows, std::size_t cols, const double* x,
                 std::size_t batch, const double* bias, double* y) {
  for (std::size_t b = 0; b < batch; ++b) {
    double* yb = y + b * rows;
    for (std::size_t r = 0; r < rows; ++r) yb[r] = bias ? bias[r] : 0.0;
    for (std::size_t c = 0; c < cols; ++c) axpy_scalar(x[b * cols + c], wt + c * rows, yb, rows);
  }
}

void axpy_f32_scalar(float alpha, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_f32_scalar(const float* wt, std::size_t rows, std::size_t cols, const float* x,
                     std::size_t batch, const float* bias, float* y) {
  for (std::size_t b = 0; b < batch; ++b) {
    float* yb = y + b * rows;
    for (std::size_t r = 0; r < rows; ++r) yb[r] = bias ? bias[r] : 0.0f;
    for (std::size_t c = 0; c < cols; ++c) axpy_f32_scalar(x[b * cols + c], wt + c * rows, yb, rows);
  }
}

}  // namespace

const KernelTable kScalarTable = {
    Isa::kScalar, dot_scalar, axpy_scalar, squared_distance_scalar,
    gemv_scalar,  mul_inplace_scalar, gemm_scalar,
    gemm_f32_scalar, axpy_f32_scalar,
};

}  // namespace dppnet::simd::detail
