#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dppnet/kernels.hpp"
#include "dppnet/types.hpp"

namespace dppnet {

// Ordered list of distinct item indices. Order is the selection order when
// produced by a sampler.
using Subset = std::vector<std::size_t>;

// Throws kInvalidArgument on duplicates or indices >= n.
void validate_subset(std::span<const std::size_t> s, std::size_t n);
// Indices of {0..n-1} not in s, ascending.
std::vector<std::size_t> complement(std::span<const std::size_t> s, std::size_t n);

// L-ensemble DPP with a cached spectrum. Immutable.
class Dpp {
 public:
  explicit Dpp(KernelMatrix kernel);

  std::size_t size() const { return kernel_.size(); }
  const KernelMatrix& kernel() const { return kernel_; }
  const SpectralDecomposition& spectrum() const { return spectrum_; }
  // log det(I + L) = sum log(1 + lambda_i)
  double log_normalizer() const { return log_normalizer_; }
  // Number of eigenvalues above lambda_max * N * machine epsilon.
  std::size_t rank() const { return rank_; }

 private:
  KernelMatrix kernel_;
  SpectralDecomposition spectrum_;
  double log_normalizer_ = 0.0;
  std::size_t rank_ = 0;
};

// log P(Y = S) = log det L_S - log det(I + L). Returns -infinity when L_S is
// numerically singular.
double log_prob(const Dpp& dpp, std::span<const std::size_t> s);

// Tr[L (L + I)^{-1}]
double expected_size(const Dpp& dpp);

// K = L (I + L)^{-1}
KernelMatrix marginal_kernel(const Dpp& dpp);

// Spectral two-phase sampler. Items are returned in selection order.
Subset sample_exact(const Dpp& dpp, Rng& rng);

// e_0..e_k of the given values.
std::vector<double> elementary_symmetric_polynomials(std::span<const double> values, std::size_t k);

// Exactly k items. Throws kInfeasibleSize when k == 0 or k > rank(L).
Subset sample_kdpp(const Dpp& dpp, std::size_t k, Rng& rng);

// Kernel of the DPP over the complement of A given A is included, rows in
// ascending original index. Throws kImpossibleCondition if P(A in Y) = 0.
KernelMatrix condition_kernel(const Dpp& dpp, std::span<const std::size_t> a);

// v_i = 1 - [(L + I_{not S})^{-1}]_ii for i not in S, v_i = 0 for i in S.
// Clipped to [0, 1]. Throws kImpossibleCondition if P(S in Y) = 0.
Vector conditional_marginals(const Dpp& dpp, std::span<const std::size_t> s);

// Greedy argmax of conditional marginals, lowest index on ties.
Subset greedy_mode(const Dpp& dpp, std::size_t k);

// Table over subsets indexed by bitmask (bit i set <=> item i in S).
struct SetFunctionTable {
  std::size_t n = 0;
  std::vector<double> values;

  static SetFunctionTable zeros(std::size_t n);
  double operator[](std::uint32_t mask) const { return values[mask]; }
  double& operator[](std::uint32_t mask) { return values[mask]; }
};

inline constexpr std::size_t kMaxEnumerationSize = 20;

std::uint32_t to_mask(std::span<const std::size_t> s);
Subset from_mask(std::uint32_t mask);

// P(Y = S) for every S. Throws kSizeGuard for N > 20.
SetFunctionTable enumerate_probs(const Dpp& dpp);
// log P(Y = S); -infinity for zero-probability subsets.
SetFunctionTable enumerate_log_probs(const Dpp& dpp);

struct MarginResult {
  double margin = 0.0;
  std::uint32_t s = 0;  // a minimizing pair
  std::uint32_t t = 0;
};

// min f(S) + f(T) - f(S u T) - f(S n T) over incomparable pairs (neither
// contains the other) of sets that are neither empty nor the full set. Nested
// pairs contribute exactly 0 and are excluded, so a strictly submodular table
// has a positive margin. Returns +infinity when no such pair exists (n < 2).
MarginResult submodularity_margin_pair(const SetFunctionTable& f);
double submodularity_margin(const SetFunctionTable& f);

}  // namespace dppnet
