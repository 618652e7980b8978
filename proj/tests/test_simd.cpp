#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <vector>

#include "dppnet/simd.hpp"

using namespace dppnet::simd;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

std::vector<float> to_float(const std::vector<double>& v) { return {v.begin(), v.end()}; }

std::vector<const KernelTable*> vector_tables() {
  std::vector<const KernelTable*> out;
  for (Isa isa : {Isa::kAvx2, Isa::kNeon}) {
    if (const KernelTable* t = kernels_for(isa)) out.push_back(t);
  }
  return out;
}

const std::size_t kSizes[] = {0, 1, 3, 4, 7, 8, 9, 15, 16, 17, 33, 100, 841};

}  // namespace

TEST_CASE("scalar table is always available") {
  CHECK(kernels_for(Isa::kScalar) == &scalar_kernels());
  CHECK(scalar_kernels().isa == Isa::kScalar);
}

TEST_CASE("force_isa switches and reset_isa restores") {
  REQUIRE(force_isa(Isa::kScalar));
  CHECK(active_isa() == Isa::kScalar);
  reset_isa();
  const Isa best = active_isa();
  if (kernels_for(Isa::kAvx2)) CHECK(best == Isa::kAvx2);
  if (kernels_for(Isa::kNeon)) CHECK(best == Isa::kNeon);
}

TEST_CASE("vector kernels agree with the scalar reference") {
  std::mt19937_64 rng(42);
  const KernelTable& ref = scalar_kernels();
  for (const KernelTable* t : vector_tables()) {
    CAPTURE(to_string(t->isa));
    for (std::size_t n : kSizes) {
      CAPTURE(n);
      const auto a = random_vec(n, rng);
      const auto b = random_vec(n, rng);
      CHECK(t->dot(a.data(), b.data(), n) == doctest::Approx(ref.dot(a.data(), b.data(), n)).epsilon(1e-12));
      CHECK(t->squared_distance(a.data(), b.data(), n) ==
            doctest::Approx(ref.squared_distance(a.data(), b.data(), n)).epsilon(1e-12));

      auto y1 = b, y2 = b;
      ref.axpy(0.37, a.data(), y1.data(), n);
      t->axpy(0.37, a.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(y2[i] == doctest::Approx(y1[i]).epsilon(1e-14));

      y1 = b;
      y2 = b;
      ref.mul_inplace(a.data(), y1.data(), n);
      t->mul_inplace(a.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(y2[i] == y1[i]);

      const auto af = to_float(a);
      auto f1 = to_float(b), f2 = to_float(b);
      ref.axpy_f32(0.37f, af.data(), f1.data(), n);
      t->axpy_f32(0.37f, af.data(), f2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(f2[i] == doctest::Approx(f1[i]).epsilon(1e-6));
    }
  }
}

TEST_CASE("gemv and gemm agree with the scalar reference, with and without bias") {
  std::mt19937_64 rng(7);
  const KernelTable& ref = scalar_kernels();
  const std::size_t shapes[][3] = {{1, 1, 1}, {3, 5, 2}, {4, 8, 4}, {7, 9, 5}, {16, 16, 6},
                                   {17, 31, 7}, {24, 13, 12}, {100, 841, 32}, {104, 33, 3}};
  for (const KernelTable* t : vector_tables()) {
    CAPTURE(to_string(t->isa));
    for (const auto& shape : shapes) {
      const std::size_t rows = shape[0], cols = shape[1], batch = shape[2];
      CAPTURE(rows);
      CAPTURE(cols);
      CAPTURE(batch);
      const auto w = random_vec(rows * cols, rng);
      const auto x = random_vec(cols * batch, rng);
      const auto bias = random_vec(rows, rng);
      for (const double* bp : {bias.data(), static_cast<const double*>(nullptr)}) {
        std::vector<double> y1(rows), y2(rows);
        ref.gemv(w.data(), rows, cols, x.data(), bp, y1.data());
        t->gemv(w.data(), rows, cols, x.data(), bp, y2.data());
        for (std::size_t r = 0; r < rows; ++r) CHECK(y2[r] == doctest::Approx(y1[r]).epsilon(1e-12));

        std::vector<double> g1(rows * batch), g2(rows * batch);
        ref.gemm(w.data(), rows, cols, x.data(), batch, bp, g1.data());
        t->gemm(w.data(), rows, cols, x.data(), batch, bp, g2.data());
        for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g2[i] == doctest::Approx(g1[i]).epsilon(1e-12));
      }
      const auto wf = to_float(w), xf = to_float(x), bf = to_float(bias);
      std::vector<float> h1(rows * batch), h2(rows * batch);
      ref.gemm_f32(wf.data(), rows, cols, xf.data(), batch, bf.data(), h1.data());
      t->gemm_f32(wf.data(), rows, cols, xf.data(), batch, bf.data(), h2.data());
      for (std::size_t i = 0; i < h1.size(); ++i) CHECK(h2[i] == doctest::Approx(h1[i]).epsilon(1e-4).scale(1.0));
    }
  }
}

TEST_CASE("gemm matches a direct triple loop on transposed weights") {
  // wt is cols x rows: y[b][r] = bias[r] + sum_c x[b][c] * wt[c][r]
  const double wt[] = {1, 2, 3, 4, 5, 6};  // cols=2, rows=3
  const double x[] = {1, -1, 0.5, 2};      // batch=2
  const double bias[] = {0.1, 0.2, 0.3};
  double y[6];
  scalar_kernels().gemm(wt, 3, 2, x, 2, bias, y);
  const double expected[] = {0.1 + 1 - 4, 0.2 + 2 - 5, 0.3 + 3 - 6,
                             0.1 + 0.5 + 8, 0.2 + 1 + 10, 0.3 + 1.5 + 12};
  for (int i = 0; i < 6; ++i) CHECK(y[i] == doctest::Approx(expected[i]).epsilon(1e-15));
}

TEST_CASE("span wrappers route through the active table") {
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  CHECK(dot(a, b) == doctest::Approx(32.0));
  CHECK(squared_distance(a, b) == doctest::Approx(27.0));
  std::vector<double> y{1, 1, 1};
  axpy(2.0, a, y);
  CHECK(y == std::vector<double>{3, 5, 7});
}
