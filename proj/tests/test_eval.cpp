#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "dppnet/error.hpp"
#include "dppnet/eval.hpp"
#include "support.hpp"

using namespace dppnet;
using testing::code_of;

namespace {

RegressionData small_regression(std::size_t items, std::uint64_t seed) {
  SyntheticRegressionSpec spec;
  spec.items = items;
  Rng rng(seed);
  return synthetic_regression(spec, rng);
}

Matrix block(const Matrix& k, const std::vector<std::size_t>& rows,
             const std::vector<std::size_t>& cols) {
  Matrix out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = k(rows[i], cols[j]);
  }
  return out;
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

}  // namespace

TEST_CASE("nll") {
  const Dpp identity(KernelMatrix(Matrix::Identity(3, 3)));
  CHECK(nll(identity, Subset{0, 1}) == doctest::Approx(std::log(8.0)).epsilon(1e-14));
  Rng rng(1);
  const Dpp dpp(testing::random_kernel(6, rng));
  for (std::uint32_t m = 0; m < 64; ++m) {
    const Subset s = from_mask(m);
    const double direct =
        dpp.log_normalizer() - (s.empty() ? 0.0 : log_det_psd(principal_submatrix(dpp.kernel().data(), s)));
    CHECK(nll(dpp, s) == doctest::Approx(direct).epsilon(1e-10));
  }
  const Dpp singular(KernelMatrix(Matrix::Ones(2, 2)));
  CHECK(nll(singular, Subset{0, 1}) == std::numeric_limits<double>::infinity());
}

TEST_CASE("NLL summaries") {
  const auto one = summarize_nll("uniform", 20, {3.0});
  CHECK(one.count() == 1);
  CHECK(one.stderr_ == 0.0);
  const auto r = summarize_nll("kdpp", 2, {1.0, 2.0, 3.0, 6.0});
  CHECK(r.mean == doctest::Approx(3.0));
  // sample sd = sqrt(14/3)
  CHECK(r.stderr_ == doctest::Approx(std::sqrt(14.0 / 3.0) / 2.0).epsilon(1e-14));
  CHECK(r.per_item_mean == doctest::Approx(1.5));
  std::ostringstream csv;
  write_nll_csv(csv, {one, r});
  CHECK(first_line(csv.str()) == "method,k,n_draws,mean_nll,stderr_nll,mean_nll_per_item,seconds");
}

TEST_CASE("compare_methods is deterministic and sorted") {
  NllSuiteConfig cfg;
  cfg.methods = {Method::kUniform};
  cfg.k = 5;
  cfg.draws = 1;
  cfg.seed = 3;
  cfg.ground_sets = {unit_square_grid(4)};
  const auto single = compare_methods(cfg);
  REQUIRE(single.size() == 1);
  CHECK(single[0].count() == 1);
  CHECK(single[0].stderr_ == 0.0);

  Rng rng(2);
  cfg.methods = {Method::kUniform, Method::kKdpp, Method::kKmedoids, Method::kInhibAttn,
                 Method::kDppnet, Method::kDppnetMode};
  cfg.draws = 6;
  cfg.ground_sets = {FeatureMatrix(testing::random_matrix(10, 2, rng)),
                     FeatureMatrix(testing::random_matrix(10, 2, rng))};
  const auto model = init_params({SurrogateMode::kDynamic, 10, 2, {8}, true}, 4);
  cfg.model = &model;
  const auto a = compare_methods(cfg);
  cfg.threads = 3;
  const auto b = compare_methods(cfg);
  REQUIRE(a.size() == 6);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].method == b[i].method);
    CHECK(a[i].nlls == b[i].nlls);
    if (i > 0) CHECK(a[i - 1].method < a[i].method);
  }
  const std::map<std::string, std::size_t> expected_counts{
      {"dppnet", 12}, {"dppnet-mode", 2}, {"inhib-attn", 12}, {"kdpp", 12}, {"kmedoids", 12}, {"uniform", 12}};
  for (const auto& r : a) CHECK(r.count() == expected_counts.at(r.method));

  cfg.methods = {Method::kDpp};
  for (const double v : compare_methods(cfg)[0].nlls) CHECK(std::isfinite(v));
  CHECK(compare_methods(cfg)[0].k == 5);

  cfg.model = nullptr;
  cfg.methods = {Method::kDppnet};
  CHECK(code_of([&] { compare_methods(cfg); }) == ErrorCode::kMissingArtifact);
}

TEST_CASE("Nystrom reconstruction") {
  Rng rng(5);
  const auto full = testing::random_kernel(8, rng);
  const Subset all{0, 1, 2, 3, 4, 5, 6, 7};
  CHECK((nystrom_reconstruct(full, all) - full.data()).norm() / full.data().norm() <= 1e-8);

  Vector phi(5);
  phi << 0.5, -1.0, 2.0, 0.0, 1.5;
  const KernelMatrix rank1(phi * phi.transpose());
  CHECK((nystrom_reconstruct(rank1, Subset{2}) - rank1.data()).norm() <= 1e-12);

  // Rank 3 from known factors: any 3 independent columns reproduce it.
  const Matrix b = testing::random_matrix(20, 3, rng);
  const KernelMatrix rank3(b * b.transpose());
  CHECK((nystrom_reconstruct(rank3, Subset{4, 11, 17}) - rank3.data()).norm() <= 1e-8);

  // Interpolation on the landmark rows and columns.
  const auto k = testing::random_kernel(10, rng);
  const Subset s{1, 6, 8};
  const Matrix approx = nystrom_reconstruct(k, s);
  for (auto i : s) {
    CHECK((approx.row(i) - k.data().row(i)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((approx.col(i) - k.data().col(i)).cwiseAbs().maxCoeff() < 1e-10);
  }
  CHECK(code_of([&] { nystrom_reconstruct(k, Subset{}); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("80/20 split") {
  const auto split = split_80_20(50, 7);
  CHECK(split.train.size() == 40);
  CHECK(split.test.size() == 10);
  std::vector<std::size_t> all = split.train;
  all.insert(all.end(), split.test.begin(), split.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 50; ++i) CHECK(all[i] == i);
  CHECK(split_80_20(50, 7).train == split.train);
  CHECK(split_80_20(50, 8).train != split.train);
}

TEST_CASE("Nystrom regression with every landmark equals exact kernel ridge regression") {
  const auto data = small_regression(40, 11);
  const KernelRecipe recipe;
  const auto split = split_80_20(40, 3);
  const double ridge = 1e-3;
  std::vector<std::size_t> s(split.train.size());
  std::iota(s.begin(), s.end(), 0);
  const auto res = nystrom_regression_rmse(data, recipe, split, s, ridge);
  CHECK(res.frobenius_error < 1e-8);

  const Matrix k = recipe.build(data.inputs).data();
  const Matrix k_train = block(k, split.train, split.train);
  Vector y(split.train.size());
  for (std::size_t i = 0; i < split.train.size(); ++i) y(i) = data.targets(split.train[i]);
  const Vector alpha =
      (k_train + ridge * Matrix::Identity(k_train.rows(), k_train.cols())).ldlt().solve(y);
  const Vector pred = block(k, split.test, split.train) * alpha;
  double se = 0.0;
  for (std::size_t i = 0; i < split.test.size(); ++i) {
    se += std::pow(pred(i) - data.targets(split.test[i]), 2);
  }
  CHECK(res.rmse == doctest::Approx(std::sqrt(se / split.test.size())).epsilon(1e-8));

  CHECK(code_of([&] { nystrom_regression_rmse(data, recipe, split, Subset{}, ridge); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(code_of([&] { nystrom_regression_rmse(data, recipe, split, Subset{1}, -1.0); }) ==
        ErrorCode::kSingularMatrix);
}

TEST_CASE("Nystrom suite: Frobenius error shrinks with more landmarks") {
  NystromSuiteConfig cfg{.data = small_regression(120, 13),
                         .recipe = {},
                         .ridge = 1e-3,
                         .sizes = {2, 5, 10, 20, 40},
                         .methods = {Method::kKdpp, Method::kUniform},
                         .seeds = 5,
                         .base_seed = 2,
                         .threads = 1};
  const auto rows = nystrom_compare(cfg);
  CHECK(rows.size() == 2 * 5 * 5);
  std::map<std::pair<std::string, std::size_t>, double> mean;
  for (const auto& r : rows) mean[{r.method, r.subset_size}] += r.frobenius_error / cfg.seeds;
  for (const std::string m : {"kdpp", "uniform"}) {
    for (std::size_t i = 1; i < cfg.sizes.size(); ++i) {
      CHECK(mean[{m, cfg.sizes[i]}] <= mean[{m, cfg.sizes[i - 1]}]);
    }
  }
  cfg.threads = 2;
  const auto again = nystrom_compare(cfg);
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(again[i].rmse == rows[i].rmse);

  std::ostringstream csv;
  write_nystrom_csv(csv, rows);
  CHECK(first_line(csv.str()) == "method,subset_size,frobenius_error,rmse,seed");
  cfg.methods = {Method::kDppnet};
  CHECK(code_of([&] { nystrom_compare(cfg); }) == ErrorCode::kConfig);
}

TEST_CASE("timing benchmark reports medians and forward counts") {
  Rng rng(17);
  const FeatureMatrix phi(testing::random_matrix(20, 2, rng));
  const auto model = init_params({SurrogateMode::kDynamic, 20, 2, {16}, true}, 1);
  TimingConfig cfg;
  cfg.k = 5;
  cfg.batch = 4;
  cfg.repeats = 3;
  const auto report = timing_benchmark(phi, KernelRecipe{}, model, cfg);
  REQUIRE(report.rows.size() == 2);
  CHECK(report.rows[0].method == "dpp");
  CHECK(report.rows[1].method == "dppnet");
  CHECK(report.rows[1].forward_calls == 4 * 5);
  CHECK(report.rows[0].runs.size() == 3);
  CHECK(report.ratio == doctest::Approx(report.rows[0].median_seconds / report.rows[1].median_seconds));
  std::ostringstream csv;
  write_timing_csv(csv, report, 5, 4);
  CHECK(first_line(csv.str()) == "method,k,batch,median_seconds,forward_calls,ratio_exact_over_surrogate");
  cfg.repeats = 0;
  CHECK(code_of([&] { timing_benchmark(phi, KernelRecipe{}, model, cfg); }) == ErrorCode::kConfig);
}

TEST_CASE("perturbation checker") {
  Rng rng(19);
  SUBCASE("strictly submodular source survives eps/4 noise") {
    const auto rep = theorem1_check(3, 1000, rng, 0.5);
    CHECK(rep.precondition_ok);
    CHECK(rep.epsilon == doctest::Approx(0.117783035656384).epsilon(1e-10));
    CHECK(rep.passes == 1000);
    CHECK(rep.violations.empty());
    CHECK(rep.worst_margin >= 0.0);
  }
  SUBCASE("adversarial 10-eps perturbation is detected") {
    const auto table = enumerate_log_probs(Dpp(equicorrelated_kernel(3, 0.5)));
    const auto bad = adversarial_perturbation(table, 10.0);
    double sup = 0.0;
    for (std::size_t i = 0; i < table.values.size(); ++i) {
      sup = std::max(sup, std::abs(bad.values[i] - table.values[i]));
    }
    CHECK(sup == doctest::Approx(10.0 * 0.117783035656384).epsilon(1e-10));
    CHECK(submodularity_margin(bad) < 0.0);
    Rng tr(1);
    const auto rep = theorem1_check(bad, 1, tr);
    CHECK_FALSE(rep.precondition_ok);
  }
  SUBCASE("modular tables violate the precondition") {
    SetFunctionTable modular = SetFunctionTable::zeros(3);
    for (std::uint32_t m = 0; m < 8; ++m) modular[m] = 0.3 * std::popcount(m);
    const auto rep = theorem1_check(modular, 10, rng);
    CHECK_FALSE(rep.precondition_ok);
    CHECK(rep.message.find("precondition") != std::string::npos);
    // A correlated pair padded with an independent item is modular across the
    // blocks, so its margin is exactly zero.
    Matrix padded = Matrix::Identity(3, 3);
    padded(0, 1) = padded(1, 0) = 0.9;
    CHECK_FALSE(theorem1_check(enumerate_log_probs(Dpp(KernelMatrix(padded))), 10, rng).precondition_ok);
  }
  CHECK(code_of([&] { theorem1_check(7, 1, rng); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { theorem1_check(1, 1, rng); }) == ErrorCode::kConfig);
}

TEST_CASE("log-inclusion tables") {
  Rng rng(23);
  const Dpp dpp(testing::random_kernel(4, rng));
  const auto probs = enumerate_probs(dpp);
  const auto table = log_inclusion_table(dpp);
  for (std::uint32_t a = 1; a < 16; ++a) {
    double p = 0.0;
    for (std::uint32_t m = 0; m < 16; ++m) p += (m & a) == a ? probs[m] : 0.0;
    CHECK(table[a] == doctest::Approx(std::log(p)).epsilon(1e-10));
  }
  CHECK(log_inclusion_table(Dpp(equicorrelated_kernel(4, 0.5))).n == 4);
  CHECK(submodularity_margin(log_inclusion_table(Dpp(equicorrelated_kernel(4, 0.5)))) ==
        doctest::Approx(0.023953241022493).epsilon(1e-10));

  const auto model = init_params({SurrogateMode::kStatic, 4, 0, {5}, true}, 3);
  const auto induced = induced_log_inclusion_table(model);
  CHECK(induced[0] == 0.0);
  const Vector q0 = forward(model, nullptr, {});
  const std::vector<std::size_t> first{1};
  const Vector q1 = forward(model, nullptr, first);
  CHECK(induced[0b1010] == doctest::Approx(std::log(q0(1)) + std::log(q1(3))).epsilon(1e-14));
  const auto dyn = init_params({SurrogateMode::kDynamic, 4, 2, {5}, true}, 3);
  CHECK(code_of([&] { induced_log_inclusion_table(dyn); }) == ErrorCode::kInvalidArgument);
}
