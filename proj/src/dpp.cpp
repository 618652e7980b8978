#include "dppnet/dpp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "dppnet/error.hpp"
#include "dppnet/random.hpp"

namespace dppnet {

std::size_t draw_categorical(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += std::max(w, 0.0);
  if (!(total > 0.0) || !std::isfinite(total)) {
    fail(ErrorCode::kDegenerateDistribution, "categorical weights sum to zero");
  }
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  std::size_t last = weights.size();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last = i;
    if (u < acc) return i;
  }
  return last;  // u landed on the rounding gap at the top
}

std::size_t argmax_lowest(std::span<const double> weights, std::span<const std::uint8_t> excluded) {
  std::size_t best = weights.size();
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!excluded.empty() && excluded[i]) continue;
    if (best == weights.size() || weights[i] > best_value) {
      best = i;
      best_value = weights[i];
    }
  }
  return best;
}

void validate_subset(std::span<const std::size_t> s, std::size_t n) {
  std::vector<bool> seen(n, false);
  for (std::size_t i : s) {
    if (i >= n) {
      fail(ErrorCode::kInvalidArgument,
           "item index " + std::to_string(i) + " out of range for ground set of size " +
               std::to_string(n));
    }
    if (seen[i]) fail(ErrorCode::kInvalidArgument, "duplicate item index " + std::to_string(i));
    seen[i] = true;
  }
}

std::vector<std::size_t> complement(std::span<const std::size_t> s, std::size_t n) {
  std::vector<bool> in(n, false);
  for (std::size_t i : s) in[i] = true;
  std::vector<std::size_t> out;
  out.reserve(n - std::min(n, s.size()));
  for (std::size_t i = 0; i < n; ++i) {
    if (!in[i]) out.push_back(i);
  }
  return out;
}

Dpp::Dpp(KernelMatrix kernel)
    : kernel_(std::move(kernel)), spectrum_(spectral_decompose(kernel_)) {
  log_normalizer_ = spectrum_.eigenvalues.array().log1p().sum();
  const double lmax = size() == 0 ? 0.0 : spectrum_.eigenvalues(0);
  const double cutoff = lmax * static_cast<double>(size()) * std::numeric_limits<double>::epsilon();
  rank_ = static_cast<std::size_t>((spectrum_.eigenvalues.array() > cutoff).count());
}

double log_prob(const Dpp& dpp, std::span<const std::size_t> s) {
  validate_subset(s, dpp.size());
  if (s.empty()) return -dpp.log_normalizer();
  const Matrix sub = principal_submatrix(dpp.kernel().data(), s);
  Eigen::LLT<Matrix> llt(sub);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const auto diag = llt.matrixLLT().diagonal();
  if ((diag.array() <= 0.0).any()) return -std::numeric_limits<double>::infinity();
  return 2.0 * diag.array().log().sum() - dpp.log_normalizer();
}

double expected_size(const Dpp& dpp) {
  const auto& lam = dpp.spectrum().eigenvalues.array();
  return (lam / (1.0 + lam)).sum();
}

KernelMatrix marginal_kernel(const Dpp& dpp) {
  const auto& sp = dpp.spectrum();
  const Vector w = (sp.eigenvalues.array() / (1.0 + sp.eigenvalues.array())).matrix();
  Matrix k = sp.eigenvectors * w.asDiagonal() * sp.eigenvectors.transpose();
  k = 0.5 * (k + k.transpose()).eval();
  return KernelMatrix(std::move(k));
}

namespace {

// Phase two of the spectral sampler: draw one item per column of the
// orthonormal basis, projecting the chosen direction out each time.
Subset sample_from_basis(Matrix basis, Rng& rng) {
  const std::size_t n = static_cast<std::size_t>(basis.rows());
  Subset out;
  out.reserve(static_cast<std::size_t>(basis.cols()));
  std::vector<double> weights(n);
  while (basis.cols() > 0) {
    for (std::size_t i = 0; i < n; ++i) weights[i] = basis.row(i).squaredNorm();
    for (std::size_t i : out) weights[i] = 0.0;
    const std::size_t item = draw_categorical(weights, rng);
    out.push_back(item);

    Eigen::Index pivot = 0;
    basis.row(item).cwiseAbs().maxCoeff(&pivot);
    const Vector pivot_col = basis.col(pivot);
    const Eigen::RowVectorXd coeffs = basis.row(item) / basis(item, pivot);
    basis -= pivot_col * coeffs;

    // drop the pivot column
    const Eigen::Index cols = basis.cols();
    if (pivot != cols - 1) basis.col(pivot) = basis.col(cols - 1);
    basis.conservativeResize(Eigen::NoChange, cols - 1);

    // modified Gram-Schmidt
    for (Eigen::Index c = 0; c < basis.cols(); ++c) {
      for (Eigen::Index p = 0; p < c; ++p) {
        basis.col(c) -= basis.col(p).dot(basis.col(c)) * basis.col(p);
      }
      const double norm = basis.col(c).norm();
      if (norm > 0.0) basis.col(c) /= norm;
    }
  }
  return out;
}

Matrix select_columns(const Matrix& m, const std::vector<Eigen::Index>& cols) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) out.col(c) = m.col(cols[c]);
  return out;
}

// L + I restricted to the complement of s on the diagonal; factorized.
Eigen::LLT<Matrix> factor_conditioned(const Dpp& dpp, std::span<const std::size_t> s) {
  const std::size_t n = dpp.size();
  Matrix m = dpp.kernel().data();
  std::vector<bool> in(n, false);
  for (std::size_t i : s) in[i] = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (!in[i]) m(i, i) += 1.0;
  }
  Eigen::LLT<Matrix> llt(m);
  const auto fail_condition = [] {
    fail(ErrorCode::kImpossibleCondition,
         "conditioning set has zero inclusion probability (L_A singular)");
  };
  if (llt.info() != Eigen::Success) fail_condition();
  const auto diag = llt.matrixLLT().diagonal();
  const double scale = m.diagonal().cwiseAbs().maxCoeff();
  const double tiny = scale * static_cast<double>(n) * std::numeric_limits<double>::epsilon();
  if ((diag.array().square() <= tiny).any()) fail_condition();
  return llt;
}

}  // namespace

Subset sample_exact(const Dpp& dpp, Rng& rng) {
  const auto& sp = dpp.spectrum();
  std::vector<Eigen::Index> chosen;
  for (Eigen::Index i = 0; i < sp.eigenvalues.size(); ++i) {
    const double lam = sp.eigenvalues(i);
    if (uniform01(rng) < lam / (1.0 + lam)) chosen.push_back(i);
  }
  return sample_from_basis(select_columns(sp.eigenvectors, chosen), rng);
}

std::vector<double> elementary_symmetric_polynomials(std::span<const double> values,
                                                     std::size_t k) {
  std::vector<double> e(k + 1, 0.0);
  e[0] = 1.0;
  for (double v : values) {
    for (std::size_t l = k; l >= 1; --l) e[l] += v * e[l - 1];
  }
  return e;
}

Subset sample_kdpp(const Dpp& dpp, std::size_t k, Rng& rng) {
  if (k == 0 || k > dpp.rank()) {
    fail(ErrorCode::kInfeasibleSize, "k-DPP size " + std::to_string(k) +
                                         " infeasible for kernel of rank " +
                                         std::to_string(dpp.rank()));
  }
  const auto& sp = dpp.spectrum();
  const std::size_t n = dpp.size();

  // Rescaling every eigenvalue by c multiplies all size-k products by c^k, so
  // the selection law is unchanged; c = geometric mean of the top k keeps
  // e_k near unity.
  double log_c = 0.0;
  for (std::size_t i = 0; i < k; ++i) log_c += std::log(sp.eigenvalues(i));
  const double c = std::exp(log_c / static_cast<double>(k));
  std::vector<double> lam(n);
  for (std::size_t i = 0; i < n; ++i) lam[i] = sp.eigenvalues(i) / c;

  // e[l][m] = e_l over the first m eigenvalues.
  std::vector<std::vector<double>> e(k + 1, std::vector<double>(n + 1, 0.0));
  std::fill(e[0].begin(), e[0].end(), 1.0);
  for (std::size_t l = 1; l <= k; ++l) {
    for (std::size_t m = 1; m <= n; ++m) e[l][m] = e[l][m - 1] + lam[m - 1] * e[l - 1][m - 1];
  }

  std::vector<Eigen::Index> chosen;
  std::size_t remaining = k;
  for (std::size_t m = n; m >= 1 && remaining > 0; --m) {
    const double p = lam[m - 1] * e[remaining - 1][m - 1] / e[remaining][m];
    if (m == remaining || uniform01(rng) < p) {
      chosen.push_back(static_cast<Eigen::Index>(m - 1));
      --remaining;
    }
  }
  return sample_from_basis(select_columns(sp.eigenvectors, chosen), rng);
}

KernelMatrix condition_kernel(const Dpp& dpp, std::span<const std::size_t> a) {
  validate_subset(a, dpp.size());
  if (a.empty()) return dpp.kernel();
  const auto llt = factor_conditioned(dpp, a);
  const auto rest = complement(a, dpp.size());
  const auto r = static_cast<Eigen::Index>(rest.size());
  if (r == 0) return KernelMatrix(Matrix(0, 0));

  Matrix rhs = Matrix::Zero(static_cast<Eigen::Index>(dpp.size()), r);
  for (Eigen::Index c = 0; c < r; ++c) rhs(rest[c], c) = 1.0;
  const Matrix cols = llt.solve(rhs);
  Matrix block(r, r);
  for (Eigen::Index i = 0; i < r; ++i) block.row(i) = cols.row(rest[i]);
  block = 0.5 * (block + block.transpose()).eval();

  Eigen::LLT<Matrix> inner(block);
  if (inner.info() != Eigen::Success) {
    fail(ErrorCode::kImpossibleCondition, "conditioned block is not positive definite");
  }
  Matrix out = inner.solve(Matrix::Identity(r, r)) - Matrix::Identity(r, r);
  out = 0.5 * (out + out.transpose()).eval();
  return KernelMatrix(std::move(out));
}

Vector conditional_marginals(const Dpp& dpp, std::span<const std::size_t> s) {
  validate_subset(s, dpp.size());
  const auto n = static_cast<Eigen::Index>(dpp.size());
  const auto llt = factor_conditioned(dpp, s);
  const Matrix inv = llt.solve(Matrix::Identity(n, n));
  Vector v = (1.0 - inv.diagonal().array()).cwiseMax(0.0).cwiseMin(1.0).matrix();
  for (std::size_t i : s) v(static_cast<Eigen::Index>(i)) = 0.0;
  return v;
}

Subset greedy_mode(const Dpp& dpp, std::size_t k) {
  const std::size_t n = dpp.size();
  if (k > n) fail(ErrorCode::kInfeasibleSize, "mode size exceeds ground set");
  Subset s;
  std::vector<std::uint8_t> taken(n, 0);
  std::vector<double> scores(n);
  while (s.size() < k) {
    const Vector v = conditional_marginals(dpp, s);
    for (std::size_t i = 0; i < n; ++i) scores[i] = v(i);
    const std::size_t next = argmax_lowest(scores, taken);
    s.push_back(next);
    taken[next] = true;
  }
  return s;
}

SetFunctionTable SetFunctionTable::zeros(std::size_t n) {
  if (n > kMaxEnumerationSize) {
    fail(ErrorCode::kSizeGuard, "set-function tables are limited to n <= 20");
  }
  return SetFunctionTable{n, std::vector<double>(std::size_t{1} << n, 0.0)};
}

std::uint32_t to_mask(std::span<const std::size_t> s) {
  std::uint32_t m = 0;
  for (std::size_t i : s) m |= std::uint32_t{1} << i;
  return m;
}

Subset from_mask(std::uint32_t mask) {
  Subset s;
  for (std::size_t i = 0; mask != 0; ++i, mask >>= 1) {
    if (mask & 1U) s.push_back(i);
  }
  return s;
}

SetFunctionTable enumerate_log_probs(const Dpp& dpp) {
  if (dpp.size() > kMaxEnumerationSize) {
    fail(ErrorCode::kSizeGuard, "enumeration limited to N <= 20, got N = " +
                                    std::to_string(dpp.size()));
  }
  auto table = SetFunctionTable::zeros(dpp.size());
  for (std::uint32_t mask = 0; mask < table.values.size(); ++mask) {
    table[mask] = log_prob(dpp, from_mask(mask));
  }
  return table;
}

SetFunctionTable enumerate_probs(const Dpp& dpp) {
  auto table = enumerate_log_probs(dpp);
  for (double& v : table.values) v = std::exp(v);
  return table;
}

MarginResult submodularity_margin_pair(const SetFunctionTable& f) {
  if (f.values.size() != (std::size_t{1} << f.n)) {
    fail(ErrorCode::kInvalidArgument, "set-function table length must be 2^n");
  }
  for (double v : f.values) {
    if (!std::isfinite(v)) fail(ErrorCode::kInvalidArgument, "set-function table has non-finite entries");
  }
  MarginResult best{std::numeric_limits<double>::infinity(), 0, 0};
  const std::uint32_t full = static_cast<std::uint32_t>(f.values.size() - 1);
  for (std::uint32_t s = 1; s < full; ++s) {
    for (std::uint32_t t = s + 1; t < full; ++t) {
      const std::uint32_t meet = s & t;
      if (meet == s || meet == t) continue;
      const double m = f[s] + f[t] - f[s | t] - f[meet];
      if (m < best.margin) best = {m, s, t};
    }
  }
  return best;
}

double submodularity_margin(const SetFunctionTable& f) {
  return submodularity_margin_pair(f).margin;
}

}  // namespace dppnet
