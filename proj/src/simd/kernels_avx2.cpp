// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include "kernels_impl.hpp"

namespace dppnet::simd::detail {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double squared_distance_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double out = hsum(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    out += d * d;
  }
  return out;
}

// Four output rows per pass so each x load feeds four FMAs.
void gemv_avx2(const double* w, std::size_t rows, std::size_t cols,
               const double* x, const double* bias, double* y) {
  std::size_t r = 0;
  for (; r + 4 <= rows; r += 4) {
    const double* w0 = w + r * cols;
    const double* w1 = w0 + cols;
    const double* w2 = w1 + cols;
    const double* w3 = w2 + cols;
    __m256d a0 = _mm256_setzero_pd();
    __m256d a1 = _mm256_setzero_pd();
    __m256d a2 = _mm256_setzero_pd();
    __m256d a3 = _mm256_setzero_pd();
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      const __m256d vx = _mm256_loadu_pd(x + c);
      a0 = _mm256_fmadd_pd(_mm256_loadu_pd(w0 + c), vx, a0);
      a1 = _mm256_fmadd_pd(_mm256_loadu_pd(w1 + c), vx, a1);
      a2 = _mm256_fmadd_pd(_mm256_loadu_pd(w2 + c), vx, a2);
      a3 = _mm256_fmadd_pd(_mm256_loadu_pd(w3 + c), vx, a3);
    }
    double s0 = hsum(a0), s1 = hsum(a1), s2 = hsum(a2), s3 = hsum(a3);
    for (; c < cols; ++c) {
      s0 += w0[c] * x[c];
      s1 += w1[c] * x[c];
      s2 += w2[c] * x[c];
      s3 += w3[c] * x[c];
    }
    y[r] = s0 + (bias ? bias[r] : 0.0);
    y[r + 1] = s1 + (bias ? bias[r + 1] : 0.0);
    y[r + 2] = s2 + (bias ? bias[r + 2] : 0.0);
    y[r + 3] = s3 + (bias ? bias[r + 3] : 0.0);
  }
  for (; r < rows; ++r) {
    y[r] = (bias ? bias[r] : 0.0) + dot_avx2(w + r * cols, x, cols);
  }
}

void mul_inplace_avx2(const double* x, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] *= x[i];
}

// Register block of 8 output rows by 4 batch entries: each step loads two
// weight vectors and broadcasts four inputs into eight FMAs.
void gemm_avx2(const double* wt, std::size_t rows, std::size_t cols, const double* x,
               std::size_t batch, const double* bias, double* y) {
  for (std::size_t b = 0; b < batch; ++b) {
    double* yb = y + b * rows;
    for (std::size_t r = 0; r < rows; ++r) yb[r] = bias ? bias[r] : 0.0;
  }
  std::size_t b = 0;
  for (; b + 4 <= batch; b += 4) {
    const double* x0 = x + b * cols;
    const double* x1 = x0 + cols;
    const double* x2 = x1 + cols;
    const double* x3 = x2 + cols;
    double* y0 = y + b * rows;
    double* y1 = y0 + rows;
    double* y2 = y1 + rows;
    double* y3 = y2 + rows;
    std::size_t r = 0;
    for (; r + 8 <= rows; r += 8) {
      __m256d a0l = _mm256_loadu_pd(y0 + r), a0h = _mm256_loadu_pd(y0 + r + 4);
      __m256d a1l = _mm256_loadu_pd(y1 + r), a1h = _mm256_loadu_pd(y1 + r + 4);
      __m256d a2l = _mm256_loadu_pd(y2 + r), a2h = _mm256_loadu_pd(y2 + r + 4);
      __m256d a3l = _mm256_loadu_pd(y3 + r), a3h = _mm256_loadu_pd(y3 + r + 4);
      const double* w = wt + r;
      for (std::size_t c = 0; c < cols; ++c, w += rows) {
        const __m256d wl = _mm256_loadu_pd(w);
        const __m256d wh = _mm256_loadu_pd(w + 4);
        __m256d v = _mm256_broadcast_sd(x0 + c);
        a0l = _mm256_fmadd_pd(v, wl, a0l);
        a0h = _mm256_fmadd_pd(v, wh, a0h);
        v = _mm256_broadcast_sd(x1 + c);
        a1l = _mm256_fmadd_pd(v, wl, a1l);
        a1h = _mm256_fmadd_pd(v, wh, a1h);
        v = _mm256_broadcast_sd(x2 + c);
        a2l = _mm256_fmadd_pd(v, wl, a2l);
        a2h = _mm256_fmadd_pd(v, wh, a2h);
        v = _mm256_broadcast_sd(x3 + c);
        a3l = _mm256_fmadd_pd(v, wl, a3l);
        a3h = _mm256_fmadd_pd(v, wh, a3h);
      }
      _mm256_storeu_pd(y0 + r, a0l);
      _mm256_storeu_pd(y0 + r + 4, a0h);
      _mm256_storeu_pd(y1 + r, a1l);
      _mm256_storeu_pd(y1 + r + 4, a1h);
      _mm256_storeu_pd(y2 + r, a2l);
      _mm256_storeu_pd(y2 + r + 4, a2h);
      _mm256_storeu_pd(y3 + r, a3l);
      _mm256_storeu_pd(y3 + r + 4, a3h);
    }
    if (r < rows) {
      for (std::size_t c = 0; c < cols; ++c) {
        const double* w = wt + c * rows;
        for (std::size_t rr = r; rr < rows; ++rr) {
          y0[rr] += x0[c] * w[rr];
          y1[rr] += x1[c] * w[rr];
          y2[rr] += x2[c] * w[rr];
          y3[rr] += x3[c] * w[rr];
        }
      }
    }
  }
  for (; b < batch; ++b) {
    for (std::size_t c = 0; c < cols; ++c) axpy_avx2(x[b * cols + c], wt + c * rows, y + b * rows, rows);
  }
}

void axpy_f32_avx2(float alpha, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Accumulates ROWS x BATCH outputs in registers over all inputs.
template <int VECS, int BATCH>
inline void gemm_f32_block(const float* wt, std::size_t rows, std::size_t cols, const float* x,
                           float* y) {
  __m256 acc[BATCH][VECS];
  for (int b = 0; b < BATCH; ++b) {
    for (int v = 0; v < VECS; ++v) acc[b][v] = _mm256_loadu_ps(y + b * rows + 8 * v);
  }
  const float* w = wt;
  for (std::size_t c = 0; c < cols; ++c, w += rows) {
    __m256 wv[VECS];
    for (int v = 0; v < VECS; ++v) wv[v] = _mm256_loadu_ps(w + 8 * v);
    for (int b = 0; b < BATCH; ++b) {
      const __m256 xb = _mm256_broadcast_ss(x + b * cols + c);
      for (int v = 0; v < VECS; ++v) acc[b][v] = _mm256_fmadd_ps(xb, wv[v], acc[b][v]);
    }
  }
  for (int b = 0; b < BATCH; ++b) {
    for (int v = 0; v < VECS; ++v) _mm256_storeu_ps(y + b * rows + 8 * v, acc[b][v]);
  }
}

template <int BATCH>
void gemm_f32_rows(const float* wt, std::size_t rows, std::size_t cols, const float* x, float* y) {
  std::size_t r = 0;
  for (; r + 16 <= rows; r += 16) gemm_f32_block<2, BATCH>(wt + r, rows, cols, x, y + r);
  for (; r + 8 <= rows; r += 8) gemm_f32_block<1, BATCH>(wt + r, rows, cols, x, y + r);
  if (r < rows) {
    for (std::size_t c = 0; c < cols; ++c) {
      const float* w = wt + c * rows;
      for (int b = 0; b < BATCH; ++b) {
        const float xb = x[b * cols + c];
        for (std::size_t rr = r; rr < rows; ++rr) y[b * rows + rr] += xb * w[rr];
      }
    }
  }
}

// Register blocks of 16 output rows by 6 batch entries (12 accumulators).
void gemm_f32_avx2(const float* wt, std::size_t rows, std::size_t cols, const float* x,
                   std::size_t batch, const float* bias, float* y) {
  for (std::size_t b = 0; b < batch; ++b) {
    float* yb = y + b * rows;
    for (std::size_t r = 0; r < rows; ++r) yb[r] = bias ? bias[r] : 0.0f;
  }
  std::size_t b = 0;
  for (; b + 6 <= batch; b += 6) gemm_f32_rows<6>(wt, rows, cols, x + b * cols, y + b * rows);
  for (; b + 2 <= batch; b += 2) gemm_f32_rows<2>(wt, rows, cols, x + b * cols, y + b * rows);
  for (; b < batch; ++b) gemm_f32_rows<1>(wt, rows, cols, x + b * cols, y + b * rows);
}

}  // namespace

const KernelTable kAvx2Table = {
    Isa::kAvx2, dot_avx2, axpy_avx2, squared_distance_avx2,
    gemv_avx2,  mul_inplace_avx2, gemm_avx2,
    gemm_f32_avx2, axpy_f32_avx2,
};

}  // namespace dppnet::simd::detail
