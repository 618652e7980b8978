#include <arm_neon.h>

#include "kernels_impl.hpp"

namespace dppnet::simd::detail {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double squared_distance_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t d = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    acc = vfmaq_f64(acc, d, d);
  }
  double out = vaddvq_f64(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    out += d * d;
  }
  return out;
}

void gemv_neon(const double* w, std::size_t rows, std::size_t cols,
               const double* x, const double* bias, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    y[r] = (bias ? bias[r] : 0.0) + dot_neon(w + r * cols, x, cols);
  }
}

void mul_inplace_neon(const double* x, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  for (; i < n; ++i) y[i] *= x[i];
}

// Register block of 4 output rows by 4 batch entries.
void gemm_neon(const double* wt, std::size_t rows, std::size_t cols, const double* x,
               std::size_t batch, const double* bias, double* y) {
  for (std::size_t b = 0; b < batch; ++b) {
    double* yb = y + b * rows;
    for (std::size_t r = 0; r < rows; ++r) yb[r] = bias ? bias[r] : 0.0;
  }
  std::size_t b = 0;
  for (; b + 4 <= batch; b += 4) {
    const double* xs[4] = {x + b * cols, x + (b + 1) * cols, x + (b + 2) * cols, x + (b + 3) * cols};
    double* ys[4] = {y + b * rows, y + (b + 1) * rows, y + (b + 2) * rows, y + (b + 3) * rows};
    std::size_t r = 0;
    for (; r + 4 <= rows; r += 4) {
      float64x2_t acc[4][2];
      for (int j = 0; j < 4; ++j) {
        acc[j][0] = vld1q_f64(ys[j] + r);
        acc[j][1] = vld1q_f64(ys[j] + r + 2);
      }
      const double* w = wt + r;
      for (std::size_t c = 0; c < cols; ++c, w += rows) {
        const float64x2_t wl = vld1q_f64(w);
        const float64x2_t wh = vld1q_f64(w + 2);
        for (int j = 0; j < 4; ++j) {
          acc[j][0] = vfmaq_n_f64(acc[j][0], wl, xs[j][c]);
          acc[j][1] = vfmaq_n_f64(acc[j][1], wh, xs[j][c]);
        }
      }
      for (int j = 0; j < 4; ++j) {
        vst1q_f64(ys[j] + r, acc[j][0]);
        vst1q_f64(ys[j] + r + 2, acc[j][1]);
      }
    }
    if (r < rows) {
      for (std::size_t c = 0; c < cols; ++c) {
        const double* w = wt + c * rows;
        for (int j = 0; j < 4; ++j) {
          for (std::size_t rr = r; rr < rows; ++rr) ys[j][rr] += xs[j][c] * w[rr];
        }
      }
    }
  }
  for (; b < batch; ++b) {
    for (std::size_t c = 0; c < cols; ++c) axpy_neon(x[b * cols + c], wt + c * rows, y + b * rows, rows);
  }
}

void axpy_f32_neon(float alpha, const float* x, float* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vfmaq_n_f32(vld1q_f32(y + i), vld1q_f32(x + i), alpha));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Register block of 8 output rows by 4 batch entries.
void gemm_f32_neon(const float* wt, std::size_t rows, std::size_t cols, const float* x,
                   std::size_t batch, const float* bias, float* y) {
  for (std::size_t b = 0; b < batch; ++b) {
    float* yb = y + b * rows;
    for (std::size_t r = 0; r < rows; ++r) yb[r] = bias ? bias[r] : 0.0f;
  }
  std::size_t b = 0;
  for (; b + 4 <= batch; b += 4) {
    const float* xs[4] = {x + b * cols, x + (b + 1) * cols, x + (b + 2) * cols, x + (b + 3) * cols};
    float* ys[4] = {y + b * rows, y + (b + 1) * rows, y + (b + 2) * rows, y + (b + 3) * rows};
    std::size_t r = 0;
    for (; r + 8 <= rows; r += 8) {
      float32x4_t acc[4][2];
      for (int j = 0; j < 4; ++j) {
        acc[j][0] = vld1q_f32(ys[j] + r);
        acc[j][1] = vld1q_f32(ys[j] + r + 4);
      }
      const float* w = wt + r;
      for (std::size_t c = 0; c < cols; ++c, w += rows) {
        const float32x4_t wl = vld1q_f32(w);
        const float32x4_t wh = vld1q_f32(w + 4);
        for (int j = 0; j < 4; ++j) {
          acc[j][0] = vfmaq_n_f32(acc[j][0], wl, xs[j][c]);
          acc[j][1] = vfmaq_n_f32(acc[j][1], wh, xs[j][c]);
        }
      }
      for (int j = 0; j < 4; ++j) {
        vst1q_f32(ys[j] + r, acc[j][0]);
        vst1q_f32(ys[j] + r + 4, acc[j][1]);
      }
    }
    if (r < rows) {
      for (std::size_t c = 0; c < cols; ++c) {
        const float* w = wt + c * rows;
        for (int j = 0; j < 4; ++j) {
          for (std::size_t rr = r; rr < rows; ++rr) ys[j][rr] += xs[j][c] * w[rr];
        }
      }
    }
  }
  for (; b < batch; ++b) {
    for (std::size_t c = 0; c < cols; ++c) axpy_f32_neon(x[b * cols + c], wt + c * rows, y + b * rows, rows);
  }
}

}  // namespace

const KernelTable kNeonTable = {
    Isa::kNeon, dot_neon, axpy_neon, squared_distance_neon,
    gemv_neon,  mul_inplace_neon, gemm_neon,
    gemm_f32_neon, axpy_f32_neon,
};

}  // namespace dppnet::simd::detail
