#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "dppnet/types.hpp"

namespace dppnet {

// N x d feature matrix, one row per ground-set item.
class FeatureMatrix {
 public:
  // Throws kInvalidArgument on an empty shape or non-finite entries.
  explicit FeatureMatrix(Matrix data);

  std::size_t items() const { return static_cast<std::size_t>(data_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(data_.cols()); }
  const Matrix& data() const { return data_; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * dim(), dim()};
  }

 private:
  Matrix data_;
};

// Symmetric PSD kernel L over N items.
class KernelMatrix {
 public:
  // Validates symmetry (abs tol 1e-10) and finiteness; PSD is checked by
  // spectral_decompose.
  explicit KernelMatrix(Matrix data);

  std::size_t size() const { return static_cast<std::size_t>(data_.rows()); }
  const Matrix& data() const { return data_; }
  double operator()(std::size_t i, std::size_t j) const { return data_(i, j); }

 private:
  Matrix data_;
};

struct SpectralDecomposition {
  Vector eigenvalues;  // descending, clamped to >= 0
  Matrix eigenvectors; // column j pairs with eigenvalues[j]
};

inline constexpr double kSymmetryTolerance = 1e-10;
inline constexpr double kPsdRelTolerance = 1e-8;

struct CsvOptions {
  char delimiter = ',';
};

FeatureMatrix load_features(const std::filesystem::path& path, CsvOptions opts = {});
// Same parser over in-memory text; `source` names the input in error messages.
FeatureMatrix parse_features(std::string_view text, std::string_view source = "<memory>",
                             CsvOptions opts = {});

// m*m points (i/(m-1), j/(m-1)), row-major in (i, j).
FeatureMatrix unit_square_grid(std::size_t m);

// L_ij = exp(-beta * |phi_i - phi_j|^2).
KernelMatrix exp_quadratic_kernel(const FeatureMatrix& phi, double beta);

// L = Phi Phi^T. No scaling is applied.
KernelMatrix linear_kernel(const FeatureMatrix& phi);

// Eigenvalues below -1e-8 * lambda_max are rejected (kNotPsd); the rest are
// clamped to zero.
SpectralDecomposition spectral_decompose(const KernelMatrix& kernel);

// log det of a symmetric positive-definite matrix via Cholesky. The 0x0 matrix
// has log det 0. Throws kSingularMatrix if the factorization fails.
double log_det_psd(const Matrix& m);

enum class KernelType { kExpQuadratic, kLinear };

// How to turn a feature matrix into a kernel.
struct KernelRecipe {
  KernelType type = KernelType::kExpQuadratic;
  double beta = 0.5;

  KernelMatrix build(const FeatureMatrix& phi) const;
};

// Principal submatrix M[idx, idx].
Matrix principal_submatrix(const Matrix& m, std::span<const std::size_t> idx);

}  // namespace dppnet
