#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dppnet/dpp.hpp"
#include "dppnet/samplers.hpp"
#include "dppnet/surrogate.hpp"
#include "dppnet/synthetic.hpp"

namespace dppnet {

// -log P(Y = S); +infinity for zero-probability subsets.
double nll(const Dpp& dpp, std::span<const std::size_t> s);

struct NllReport {
  std::string method;
  std::size_t k = 0;
  std::vector<double> nlls;
  double mean = 0.0;
  double stderr_ = 0.0;   // sample stddev / sqrt(count); 0 for a single draw
  double per_item_mean = 0.0;
  double seconds = 0.0;   // sampling wallclock

  std::size_t count() const { return nlls.size(); }
};

NllReport summarize_nll(std::string method, std::size_t k, std::vector<double> nlls,
                        double seconds = 0.0);

struct NllSuiteConfig {
  std::vector<Method> methods;
  std::size_t k = 20;
  std::size_t draws = 100;  // per ground set; deterministic methods draw once
  std::uint64_t seed = 0;
  std::vector<FeatureMatrix> ground_sets;
  KernelRecipe recipe;
  const SurrogateModel* model = nullptr;
  std::size_t threads = 1;
};

// One report per method, sorted by method name. Pure in (config, seed).
// "dpp" rows use k-DPP draws at cfg.k.
std::vector<NllReport> compare_methods(const NllSuiteConfig& cfg);

void write_nll_csv(std::ostream& out, const std::vector<NllReport>& reports);

// K_{.,S} pinv(K_{S,S}) K_{S,.}, pseudoinverse cutoff 1e-10 * lambda_max.
Matrix nystrom_reconstruct(const KernelMatrix& k, std::span<const std::size_t> s);

struct NystromResult {
  Subset subset;
  double frobenius_error = 0.0;  // on the training block
  double rmse = 0.0;             // on held-out targets
};

struct TrainTestSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// 80/20 split of n examples by shuffling with `seed`.
TrainTestSplit split_80_20(std::size_t n, std::uint64_t seed);

// Kernel ridge regression where the training kernel and the test/train cross
// kernel are replaced by their Nystrom approximations through landmarks S
// (indices into split.train).
NystromResult nystrom_regression_rmse(const RegressionData& data, const KernelRecipe& recipe,
                                      const TrainTestSplit& split,
                                      std::span<const std::size_t> s, double ridge);

struct NystromRow {
  std::string method;
  std::size_t subset_size = 0;
  double frobenius_error = 0.0;
  double rmse = 0.0;
  std::uint64_t seed = 0;
};

struct NystromSuiteConfig {
  RegressionData data;
  KernelRecipe recipe;
  double ridge = 1e-3;
  std::vector<std::size_t> sizes;
  std::vector<Method> methods;  // kdpp, dpp (treated as kdpp), uniform, kmedoids
  std::size_t seeds = 20;
  std::uint64_t base_seed = 0;
  std::size_t threads = 1;
};

std::vector<NystromRow> nystrom_compare(const NystromSuiteConfig& cfg);
void write_nystrom_csv(std::ostream& out, const std::vector<NystromRow>& rows);

struct TimingRow {
  std::string method;
  double median_seconds = 0.0;   // per batch
  std::vector<double> runs;
  std::size_t forward_calls = 0; // per batch; 0 for the exact sampler
};

struct TimingConfig {
  std::size_t k = 20;
  std::size_t batch = 32;
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
};

struct TimingReport {
  std::vector<TimingRow> rows;  // "dpp" (exact spectral) then "dppnet"
  double ratio = 0.0;           // exact / surrogate median
};

// Exact timing per batch: one spectral decomposition of the kernel plus
// `batch` k-DPP draws. Surrogate timing per batch: one lockstep batch of `batch`
// sequential draws (sample_surrogate_batch).
TimingReport timing_benchmark(const FeatureMatrix& ground_set, const KernelRecipe& recipe,
                              const SurrogateModel& model, const TimingConfig& cfg);

void write_timing_csv(std::ostream& out, const TimingReport& report, std::size_t k,
                      std::size_t batch);

// Kernel with unit diagonal and every off-diagonal entry rho.
KernelMatrix equicorrelated_kernel(std::size_t n, double rho);

struct Theorem1Report {
  bool precondition_ok = false;
  double epsilon = 0.0;
  std::size_t trials = 0;
  std::size_t passes = 0;
  double worst_margin = 0.0;  // smallest perturbed margin seen
  std::vector<std::pair<std::uint32_t, std::uint32_t>> violations;  // (S, T) masks
  std::string message;
};

// Perturbs the table by independent uniform noise with sup-norm <= eps/4 and
// checks that every perturbed table stays submodular.
Theorem1Report theorem1_check(const SetFunctionTable& table, std::size_t trials, Rng& rng);
// Same, with the log-probability table of equicorrelated_kernel(n, rho).
Theorem1Report theorem1_check(std::size_t n, std::size_t trials, Rng& rng, double rho = 0.5);

// Adversarial perturbation of sup-norm `factor` * eps concentrated on the
// minimizing pair; returns the perturbed table.
SetFunctionTable adversarial_perturbation(const SetFunctionTable& table, double factor);

// Log-inclusion table induced by a static surrogate: for S in ascending order
// s_1 < ... < s_m, sum_j log q(s_j | {s_1..s_{j-1}}). For exact marginals this
// is log P(S in Y) = log det K_S.
SetFunctionTable induced_log_inclusion_table(const SurrogateModel& model);

// log det K_S for every S, K the marginal kernel.
SetFunctionTable log_inclusion_table(const Dpp& dpp);

struct InducedMarginReport {
  double epsilon = 0.0;            // margin of the exact log-inclusion table
  double table_sup_error = 0.0;    // sup-norm distance of the induced table
  double marginal_sup_error = 0.0; // max |q - v| over all prefixes and items
  double induced_margin = 0.0;
  bool gate_met = false;           // table_sup_error <= epsilon / 4
  bool passed() const { return gate_met && induced_margin >= 0.0; }
};

// Compares a trained static surrogate with the exact DPP it imitates.
InducedMarginReport induced_margin_check(const Dpp& dpp, const SurrogateModel& model);

}  // namespace dppnet
