#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>

#include "dppnet/error.hpp"
#include "dppnet/kernels.hpp"
#include "support.hpp"

using namespace dppnet;
using testing::code_of;
using testing::message_of;

TEST_CASE("feature CSV: plain rows, header detection, blank lines") {
  const auto plain = parse_features("1,2\n3,4\n");
  CHECK(plain.items() == 2);
  CHECK(plain.dim() == 2);
  CHECK(plain.data()(1, 0) == 3.0);

  const auto header = parse_features("x,y\n0.5,1e-3\n\n-2, 7\n");
  CHECK(header.items() == 2);
  CHECK(header.data()(0, 1) == doctest::Approx(1e-3));
  CHECK(header.data()(1, 1) == 7.0);

  const auto semi = parse_features("1;2;3\n", "<mem>", CsvOptions{';'});
  CHECK(semi.dim() == 3);
}

TEST_CASE("feature CSV errors name the location") {
  CHECK(code_of([] { parse_features(""); }) == ErrorCode::kFormat);
  CHECK(code_of([] { parse_features("a,b\n"); }) == ErrorCode::kFormat);
  CHECK(code_of([] { parse_features("1,2\n3\n"); }) == ErrorCode::kFormat);
  CHECK(message_of([] { parse_features("1,2\n3\n", "f.csv"); }).find("ragged row 2") != std::string::npos);
  CHECK(code_of([] { parse_features("1,2\n3,oops\n"); }) == ErrorCode::kParse);
  const auto msg = message_of([] { parse_features("1,2\n3,oops\n", "f.csv"); });
  CHECK(msg.find("row 2") != std::string::npos);
  CHECK(msg.find("column 2") != std::string::npos);
  CHECK(code_of([] { parse_features("1,nan\n"); }) != ErrorCode::kIo);
}

TEST_CASE("feature file loading") {
  testing::TempDir dir("kernels");
  const auto path = dir.file("f.csv", "a,b,c\n1,2,3\n4,5,6\n");
  const auto phi = load_features(path);
  CHECK(phi.items() == 2);
  CHECK(phi.dim() == 3);
  CHECK(code_of([&] { load_features(dir.path / "missing.csv"); }) == ErrorCode::kIo);
}

TEST_CASE("FeatureMatrix validation") {
  CHECK(code_of([] { FeatureMatrix(Matrix(0, 2)); }) == ErrorCode::kInvalidArgument);
  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 0) = std::nan("");
  CHECK(code_of([&] { FeatureMatrix{bad}; }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("unit-square grid layout") {
  const auto g = unit_square_grid(10);
  CHECK(g.items() == 100);
  CHECK(g.dim() == 2);
  CHECK(g.data()(0, 0) == 0.0);
  CHECK(g.data()(0, 1) == 0.0);
  CHECK(g.data()(1, 1) == doctest::Approx(1.0 / 9.0));
  CHECK(g.data()(10, 0) == doctest::Approx(1.0 / 9.0));
  CHECK(g.data()(99, 0) == 1.0);
  CHECK(g.data()(99, 1) == 1.0);
  CHECK(code_of([] { unit_square_grid(1); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("exp-quadratic kernel values") {
  const auto l = exp_quadratic_kernel(unit_square_grid(10), 0.5);
  CHECK(l.size() == 100);
  CHECK(l(3, 3) == 1.0);
  // Independent numpy evaluation of exp(-|x_i - x_j|^2 / 2) on the grid.
  CHECK(l(0, 1) == doctest::Approx(0.99384617332644121).epsilon(1e-15));
  CHECK(l(0, 11) == doctest::Approx(0.98773021623561053).epsilon(1e-15));
  CHECK(l(0, 99) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(code_of([] { exp_quadratic_kernel(unit_square_grid(2), 0.0); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("linear kernel is Phi Phi^T") {
  Matrix m(2, 2);
  m << 1, 2, 3, 4;
  const auto l = linear_kernel(FeatureMatrix(m));
  CHECK(l(0, 0) == 5.0);
  CHECK(l(0, 1) == 11.0);
  CHECK(l(1, 1) == 25.0);
  CHECK(KernelRecipe{KernelType::kLinear, 1.0}.build(FeatureMatrix(m))(1, 0) == 11.0);
}

TEST_CASE("KernelMatrix rejects malformed input") {
  CHECK(code_of([] { KernelMatrix(Matrix::Zero(2, 3)); }) == ErrorCode::kInvalidKernel);
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 1e-6;
  CHECK(code_of([&] { KernelMatrix{asym}; }) == ErrorCode::kInvalidKernel);
  Matrix nearly = Matrix::Identity(2, 2);
  nearly(0, 1) = 1e-12;
  CHECK_NOTHROW(KernelMatrix{nearly});
}

TEST_CASE("spectral decomposition reconstructs the kernel") {
  Rng rng(3);
  for (std::size_t n : {1, 2, 5, 20}) {
    const auto l = testing::random_kernel(n, rng);
    const auto sd = spectral_decompose(l);
    const Matrix& v = sd.eigenvectors;
    const Matrix recon = v * sd.eigenvalues.asDiagonal() * v.transpose();
    CHECK((recon - l.data()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((v.transpose() * v - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-10);
    for (std::size_t i = 1; i < n; ++i) CHECK(sd.eigenvalues(i - 1) >= sd.eigenvalues(i));
    CHECK(sd.eigenvalues.minCoeff() >= 0.0);
  }
}

TEST_CASE("spectral decomposition of a rank-deficient kernel clamps to zero") {
  Rng rng(4);
  const auto l = testing::random_kernel(6, rng, 2);
  const auto sd = spectral_decompose(l);
  for (std::size_t i = 2; i < 6; ++i) CHECK(sd.eigenvalues(i) < 1e-12);
  CHECK(sd.eigenvalues.minCoeff() >= 0.0);
}

TEST_CASE("spectral decomposition rejects indefinite kernels") {
  Matrix m(2, 2);
  m << 1, 2, 2, 1;  // eigenvalues 3 and -1
  CHECK(code_of([&] { spectral_decompose(KernelMatrix(m)); }) == ErrorCode::kNotPsd);
}

TEST_CASE("log_det_psd") {
  Matrix m(2, 2);
  m << 2, 1, 1, 2;
  CHECK(log_det_psd(m) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK(log_det_psd(Matrix(0, 0)) == 0.0);
  Matrix singular(2, 2);
  singular << 1, 1, 1, 1;
  CHECK(code_of([&] { log_det_psd(singular); }) == ErrorCode::kSingularMatrix);
  // numpy: sum log(1 + lambda) for the unit-square grid kernel with beta = 1/2.
  const Matrix l = exp_quadratic_kernel(unit_square_grid(10), 0.5).data();
  CHECK(log_det_psd(Matrix::Identity(100, 100) + l) == doctest::Approx(9.955093051848).epsilon(1e-9));
}

TEST_CASE("principal submatrix keeps index order") {
  Matrix m(3, 3);
  m << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  const std::size_t idx[] = {2, 0};
  const Matrix sub = principal_submatrix(m, idx);
  CHECK(sub(0, 0) == 9.0);
  CHECK(sub(0, 1) == 7.0);
  CHECK(sub(1, 0) == 3.0);
  CHECK(sub(1, 1) == 1.0);
}
