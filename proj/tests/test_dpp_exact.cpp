#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "dppnet/dpp.hpp"
#include "dppnet/error.hpp"
#include "dppnet/random.hpp"
#include "support.hpp"

using namespace dppnet;
using testing::random_kernel;
using testing::code_of;

namespace {

Matrix pair_kernel(double a, double b, double c) {
  Matrix m(2, 2);
  m << a, b, b, c;
  return m;
}

// P(A subset of Y) by enumeration.
double inclusion_prob(const SetFunctionTable& probs, std::uint32_t a) {
  double p = 0.0;
  for (std::uint32_t m = 0; m < probs.values.size(); ++m) {
    if ((m & a) == a) p += probs[m];
  }
  return p;
}

std::uint32_t random_mask(std::size_t n, Rng& rng, double p) {
  std::uint32_t m = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (uniform01(rng) < p) m |= 1U << i;
  }
  return m;
}

}  // namespace

TEST_CASE("subset helpers") {
  CHECK_NOTHROW(validate_subset(Subset{0, 2}, 3));
  CHECK(code_of([] { validate_subset(Subset{0, 0}, 3); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { validate_subset(Subset{3}, 3); }) == ErrorCode::kInvalidArgument);
  CHECK(complement(Subset{3, 1}, 5) == std::vector<std::size_t>{0, 2, 4});
  CHECK(to_mask(Subset{0, 3}) == 9U);
  CHECK(from_mask(9U) == Subset{0, 3});
}

TEST_CASE("log_prob on a 2x2 kernel matches closed form") {
  const Dpp dpp(KernelMatrix(pair_kernel(1.0, 0.5, 1.0)));
  // det(I + L) = 3.75, det L = 0.75
  CHECK(std::exp(log_prob(dpp, Subset{0, 1})) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(std::exp(log_prob(dpp, Subset{})) == doctest::Approx(1.0 / 3.75).epsilon(1e-14));
  CHECK(std::exp(log_prob(dpp, Subset{1})) == doctest::Approx(1.0 / 3.75).epsilon(1e-14));
  CHECK(dpp.log_normalizer() == doctest::Approx(std::log(3.75)).epsilon(1e-14));
}

TEST_CASE("log_prob of a singular subset is -infinity") {
  const Dpp dpp(KernelMatrix(pair_kernel(1.0, 1.0, 1.0)));
  CHECK(log_prob(dpp, Subset{0, 1}) == -std::numeric_limits<double>::infinity());
  CHECK(std::isfinite(log_prob(dpp, Subset{0})));
}

TEST_CASE("enumerated probabilities sum to one") {
  Rng rng(1);
  for (std::size_t n : {1, 3, 6, 8}) {
    const Dpp dpp(random_kernel(n, rng));
    const auto probs = enumerate_probs(dpp);
    CHECK(std::accumulate(probs.values.begin(), probs.values.end(), 0.0) ==
          doctest::Approx(1.0).epsilon(1e-12));
    const auto logs = enumerate_log_probs(dpp);
    for (std::size_t m = 0; m < probs.values.size(); ++m) {
      CHECK(std::exp(logs.values[m]) == doctest::Approx(probs.values[m]).epsilon(1e-10));
    }
  }
  CHECK(code_of([] { SetFunctionTable::zeros(21); }) == ErrorCode::kSizeGuard);
}

TEST_CASE("expected size: trace formula against enumeration") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 2 + trial % 7;
    const Dpp dpp(random_kernel(n, rng));
    const auto probs = enumerate_probs(dpp);
    double expected = 0.0;
    for (std::uint32_t m = 0; m < probs.values.size(); ++m) {
      expected += static_cast<double>(std::popcount(m)) * probs[m];
    }
    CHECK(expected_size(dpp) == doctest::Approx(expected).epsilon(1e-10));
  }
  const Dpp identity(KernelMatrix(Matrix::Identity(10, 10)));
  CHECK(expected_size(identity) == doctest::Approx(5.0).epsilon(1e-14));
}

TEST_CASE("marginal kernel minors are inclusion probabilities") {
  Rng rng(3);
  const Dpp dpp(random_kernel(5, rng));
  const auto probs = enumerate_probs(dpp);
  const auto k = marginal_kernel(dpp);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(k(i, i) == doctest::Approx(inclusion_prob(probs, 1U << i)).epsilon(1e-10));
  }
  const double det01 = k(0, 0) * k(1, 1) - k(0, 1) * k(1, 0);
  CHECK(det01 == doctest::Approx(inclusion_prob(probs, 3U)).epsilon(1e-10));
}

TEST_CASE("elementary symmetric polynomials") {
  const std::vector<double> v{1, 2, 3};
  const auto e = elementary_symmetric_polynomials(v, 3);
  REQUIRE(e.size() == 4);
  CHECK(e[0] == 1.0);
  CHECK(e[1] == 6.0);
  CHECK(e[2] == 11.0);
  CHECK(e[3] == 6.0);
  CHECK(elementary_symmetric_polynomials(v, 1).size() == 2);
}

TEST_CASE("exact sampler matches the enumerated law (TV <= 0.02)") {
  Rng rng(11);
  const Dpp dpp(random_kernel(6, rng));
  const auto probs = enumerate_probs(dpp);
  std::map<std::uint32_t, std::size_t> counts;
  const std::size_t draws = 100000;
  for (std::size_t d = 0; d < draws; ++d) {
    const Subset s = sample_exact(dpp, rng);
    validate_subset(s, 6);
    ++counts[to_mask(s)];
  }
  CHECK(testing::tv_distance(counts, draws, probs) <= 0.02);
}

TEST_CASE("k-DPP sampler matches renormalized determinants (TV <= 0.02)") {
  Rng rng(12);
  const Dpp dpp(random_kernel(6, rng));
  const auto probs = enumerate_probs(dpp);
  SetFunctionTable law = SetFunctionTable::zeros(6);
  double total = 0.0;
  for (std::uint32_t m = 0; m < law.values.size(); ++m) {
    if (std::popcount(m) == 3) total += probs[m];
  }
  for (std::uint32_t m = 0; m < law.values.size(); ++m) {
    law[m] = std::popcount(m) == 3 ? probs[m] / total : 0.0;
  }
  std::map<std::uint32_t, std::size_t> counts;
  const std::size_t draws = 100000;
  for (std::size_t d = 0; d < draws; ++d) {
    const Subset s = sample_kdpp(dpp, 3, rng);
    REQUIRE(s.size() == 3);
    ++counts[to_mask(s)];
  }
  CHECK(testing::tv_distance(counts, draws, law) <= 0.02);
}

TEST_CASE("k-DPP feasibility") {
  Rng rng(5);
  const Dpp low_rank(random_kernel(6, rng, 2));
  CHECK(low_rank.rank() == 2);
  CHECK(sample_kdpp(low_rank, 2, rng).size() == 2);
  CHECK(code_of([&] { sample_kdpp(low_rank, 3, rng); }) == ErrorCode::kInfeasibleSize);
  CHECK(code_of([&] { sample_kdpp(low_rank, 0, rng); }) == ErrorCode::kInfeasibleSize);
}

TEST_CASE("k-DPP on the unit-square grid stays well-conditioned at k = 20") {
  const Dpp dpp(exp_quadratic_kernel(unit_square_grid(10), 0.5));
  Rng rng(6);
  for (int i = 0; i < 20; ++i) {
    const Subset s = sample_kdpp(dpp, 20, rng);
    CHECK(s.size() == 20);
    CHECK(std::isfinite(log_prob(dpp, s)));
  }
}

TEST_CASE("sampling is deterministic for a fixed seed") {
  Rng seed_rng(9);
  const Dpp dpp(random_kernel(8, seed_rng));
  Rng a(77), b(77);
  for (int i = 0; i < 20; ++i) CHECK(sample_exact(dpp, a) == sample_exact(dpp, b));
  for (int i = 0; i < 20; ++i) CHECK(sample_kdpp(dpp, 3, a) == sample_kdpp(dpp, 3, b));
}

TEST_CASE("conditioned kernel reproduces enumerated conditionals") {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + trial % 7;  // N <= 8
    const Dpp dpp(random_kernel(n, rng));
    const auto probs = enumerate_probs(dpp);
    const std::uint32_t a = random_mask(n, rng, 0.3);
    if (std::popcount(a) == static_cast<int>(n)) continue;
    const Subset a_items = from_mask(a);
    const double pa = inclusion_prob(probs, a);
    const auto rest = complement(a_items, n);
    const Dpp cond(condition_kernel(dpp, a_items));
    REQUIRE(cond.size() == rest.size());
    // P(Y = A u B | A in Y) for a random B over the remaining items.
    const std::uint32_t b_local = random_mask(rest.size(), rng, 0.4);
    std::uint32_t b_global = 0;
    for (std::size_t j = 0; j < rest.size(); ++j) {
      if (b_local >> j & 1U) b_global |= 1U << rest[j];
    }
    const double expected = probs[a | b_global] / pa;
    CHECK(std::exp(log_prob(cond, from_mask(b_local))) == doctest::Approx(expected).epsilon(1e-8));

    const Vector v = conditional_marginals(dpp, a_items);
    for (std::size_t i = 0; i < n; ++i) {
      const double want = (a >> i & 1U) ? 0.0 : inclusion_prob(probs, a | (1U << i)) / pa;
      CHECK(v(i) == doctest::Approx(want).epsilon(1e-8));
    }
  }
}

TEST_CASE("conditioning on the empty set returns L") {
  Rng rng(22);
  const auto l = random_kernel(5, rng);
  const Dpp dpp(l);
  CHECK(condition_kernel(dpp, Subset{}).data() == l.data());
  const Vector v = conditional_marginals(dpp, Subset{});
  const auto k = marginal_kernel(dpp);
  for (std::size_t i = 0; i < 5; ++i) CHECK(v(i) == doctest::Approx(k(i, i)).epsilon(1e-10));
}

TEST_CASE("impossible conditioning is reported") {
  Rng rng(23);
  const Dpp low_rank(random_kernel(5, rng, 2));
  CHECK(code_of([&] { condition_kernel(low_rank, Subset{0, 1, 2}); }) ==
        ErrorCode::kImpossibleCondition);
  CHECK(code_of([&] { conditional_marginals(low_rank, Subset{0, 1, 2}); }) ==
        ErrorCode::kImpossibleCondition);
}

TEST_CASE("greedy mode") {
  const Dpp identity(KernelMatrix(Matrix::Identity(6, 6)));
  CHECK(greedy_mode(identity, 3) == Subset{0, 1, 2});
  Matrix l = Matrix::Identity(3, 3);
  l(0, 0) = 0.5;
  l(1, 1) = 3.0;
  CHECK(greedy_mode(Dpp(KernelMatrix(l)), 2) == Subset{1, 2});
  CHECK(code_of([&] { greedy_mode(identity, 7); }) == ErrorCode::kInfeasibleSize);
}

TEST_CASE("submodularity margin") {
  // Single pair: f({0}) + f({1}) - f({0,1}) - f({}) for log-probabilities of
  // [[1, .9], [.9, 1]] is -log(1 - 0.81).
  const Dpp pair(KernelMatrix(pair_kernel(1.0, 0.9, 1.0)));
  const auto table = enumerate_log_probs(pair);
  const auto res = submodularity_margin_pair(table);
  CHECK(res.margin == doctest::Approx(1.6607312068216509).epsilon(1e-12));
  CHECK(res.s != res.t);

  // Padding with an independent item gives block-diagonal L, which is
  // log-modular across blocks: pairs such as {0}, {2} contribute exactly 0.
  Matrix padded = Matrix::Identity(3, 3);
  padded.topLeftCorner(2, 2) = pair_kernel(1.0, 0.9, 1.0);
  CHECK(submodularity_margin(enumerate_log_probs(Dpp(KernelMatrix(padded)))) ==
        doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

  // Equicorrelated 3x3, rho = 1/2 (numpy enumeration).
  Matrix eq = Matrix::Constant(3, 3, 0.5);
  eq.diagonal().setOnes();
  CHECK(submodularity_margin(enumerate_log_probs(Dpp(KernelMatrix(eq)))) ==
        doctest::Approx(0.117783035656384).epsilon(1e-10));

  // A supermodular table has a negative margin.
  SetFunctionTable super = SetFunctionTable::zeros(2);
  super[3] = 1.0;
  CHECK(submodularity_margin(super) == doctest::Approx(-1.0));

  SetFunctionTable bad = SetFunctionTable::zeros(2);
  bad[1] = std::nan("");
  CHECK(code_of([&] { submodularity_margin(bad); }) == ErrorCode::kInvalidArgument);
  CHECK(std::isinf(submodularity_margin(SetFunctionTable::zeros(1))));
}

TEST_CASE("draw_categorical and argmax_lowest") {
  Rng rng(31);
  const std::vector<double> w{0.0, 2.0, -1.0, 2.0};
  std::size_t counts[4] = {0, 0, 0, 0};
  for (int i = 0; i < 20000; ++i) ++counts[draw_categorical(w, rng)];
  CHECK(counts[0] == 0);
  CHECK(counts[2] == 0);
  CHECK(std::abs(static_cast<double>(counts[1]) / 20000.0 - 0.5) < 0.02);
  CHECK(argmax_lowest(w) == 1);
  const std::uint8_t excluded[] = {0, 1, 0, 0};
  CHECK(argmax_lowest(w, excluded) == 3);
  const std::vector<double> zeros{0.0, -1.0};
  CHECK(code_of([&] { draw_categorical(zeros, rng); }) == ErrorCode::kDegenerateDistribution);
}
