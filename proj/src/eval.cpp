#include "dppnet/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include "dppnet/error.hpp"
#include "parallel.hpp"

namespace dppnet {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// FNV-1a, so each method's random stream depends only on its name.
std::uint64_t name_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool deterministic(Method m) { return m == Method::kDppnetMode; }

}  // namespace

double nll(const Dpp& dpp, std::span<const std::size_t> s) { return -log_prob(dpp, s); }

NllReport summarize_nll(std::string method, std::size_t k, std::vector<double> nlls,
                        double seconds) {
  if (nlls.empty()) fail(ErrorCode::kInvalidArgument, "NLL report needs at least one sample");
  NllReport r;
  r.method = std::move(method);
  r.k = k;
  r.seconds = seconds;
  const double n = static_cast<double>(nlls.size());
  r.mean = std::accumulate(nlls.begin(), nlls.end(), 0.0) / n;
  if (nlls.size() > 1 && std::isfinite(r.mean)) {
    double ss = 0.0;
    for (double v : nlls) ss += (v - r.mean) * (v - r.mean);
    r.stderr_ = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  r.per_item_mean = k == 0 ? 0.0 : r.mean / static_cast<double>(k);
  r.nlls = std::move(nlls);
  return r;
}

std::vector<NllReport> compare_methods(const NllSuiteConfig& cfg) {
  if (cfg.ground_sets.empty()) fail(ErrorCode::kConfig, "NLL suite needs at least one ground set");
  if (cfg.methods.empty()) fail(ErrorCode::kConfig, "NLL suite needs at least one method");
  if (cfg.draws == 0) fail(ErrorCode::kConfig, "draws must be positive");
  for (Method m : cfg.methods) {
    if (needs_model(m) && cfg.model == nullptr) {
      fail(ErrorCode::kMissingArtifact,
           "method '" + std::string(to_string(m)) + "' needs a trained checkpoint");
    }
  }

  std::vector<std::optional<Dpp>> dpps(cfg.ground_sets.size());
  detail::parallel_for(cfg.ground_sets.size(), cfg.threads, [&](std::size_t g) {
    dpps[g].emplace(cfg.recipe.build(cfg.ground_sets[g]));
  });

  struct Task {
    std::size_t method;
    std::size_t ground_set;
  };
  std::vector<Task> tasks;
  for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
    for (std::size_t g = 0; g < cfg.ground_sets.size(); ++g) tasks.push_back({m, g});
  }
  std::vector<std::vector<double>> task_nlls(tasks.size());
  std::vector<double> task_seconds(tasks.size(), 0.0);

  detail::parallel_for(tasks.size(), cfg.threads, [&](std::size_t t) {
    const Method method = cfg.methods[tasks[t].method];
    const std::size_t g = tasks[t].ground_set;
    const Dpp& dpp = *dpps[g];
    const SamplerContext ctx{&dpp, &cfg.ground_sets[g], cfg.model};
    const std::uint64_t stream = derive_seed(cfg.seed, name_hash(to_string(method)));
    const std::size_t draws = deterministic(method) ? 1 : cfg.draws;
    std::vector<Subset> samples;
    samples.reserve(draws);
    const auto start = Clock::now();
    for (std::size_t d = 0; d < draws; ++d) {
      const Method drawn = method == Method::kDpp ? Method::kKdpp : method;
      SamplerRequest req{drawn, cfg.k, {}, derive_seed(stream, g * cfg.draws + d)};
      samples.push_back(draw_sample(ctx, req));
    }
    task_seconds[t] = seconds_since(start);
    for (const auto& s : samples) task_nlls[t].push_back(nll(dpp, s));
  });

  std::vector<NllReport> reports;
  for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
    std::vector<double> all;
    double secs = 0.0;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      if (tasks[t].method != m) continue;
      all.insert(all.end(), task_nlls[t].begin(), task_nlls[t].end());
      secs += task_seconds[t];
    }
    reports.push_back(summarize_nll(std::string(to_string(cfg.methods[m])), cfg.k, std::move(all), secs));
  }
  std::sort(reports.begin(), reports.end(),
            [](const NllReport& a, const NllReport& b) { return a.method < b.method; });
  return reports;
}

void write_nll_csv(std::ostream& out, const std::vector<NllReport>& reports) {
  out << "method,k,n_draws,mean_nll,stderr_nll,mean_nll_per_item,seconds\n";
  out.precision(10);
  for (const auto& r : reports) {
    out << r.method << ',' << r.k << ',' << r.count() << ',' << r.mean << ',' << r.stderr_ << ','
        << r.per_item_mean << ',' << r.seconds << '\n';
  }
}

namespace {

// Pseudoinverse of a symmetric PSD matrix, eigenvalues <= 1e-10 * max dropped.
Matrix psd_pinv(const Matrix& w) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w);
  const Vector& lam = es.eigenvalues();
  const double cutoff = 1e-10 * std::max(lam.maxCoeff(), 0.0);
  Vector inv = Vector::Zero(lam.size());
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam(i) > cutoff) inv(i) = 1.0 / lam(i);
  }
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

Matrix columns(const Matrix& m, std::span<const std::size_t> cols) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) out.col(c) = m.col(cols[c]);
  return out;
}

Matrix cross_kernel(const FeatureMatrix& x, std::span<const std::size_t> rows,
                    std::span<const std::size_t> cols, const KernelRecipe& recipe) {
  Matrix out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const auto a = x.row(rows[i]);
      const auto b = x.row(cols[j]);
      double v = 0.0;
      if (recipe.type == KernelType::kLinear) {
        for (std::size_t c = 0; c < a.size(); ++c) v += a[c] * b[c];
      } else {
        double d2 = 0.0;
        for (std::size_t c = 0; c < a.size(); ++c) d2 += (a[c] - b[c]) * (a[c] - b[c]);
        v = std::exp(-recipe.beta * d2);
      }
      out(i, j) = v;
    }
  }
  return out;
}

}  // namespace

Matrix nystrom_reconstruct(const KernelMatrix& k, std::span<const std::size_t> s) {
  if (s.empty()) fail(ErrorCode::kInvalidArgument, "Nystrom landmark set must be nonempty");
  validate_subset(s, k.size());
  const Matrix c = columns(k.data(), s);
  const Matrix w = principal_submatrix(k.data(), s);
  Matrix out = c * psd_pinv(w) * c.transpose();
  return 0.5 * (out + out.transpose());
}

TrainTestSplit split_80_20(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const std::size_t n_train = (n * 4) / 5;
  TrainTestSplit out;
  out.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  return out;
}

NystromResult nystrom_regression_rmse(const RegressionData& data, const KernelRecipe& recipe,
                                      const TrainTestSplit& split,
                                      std::span<const std::size_t> s, double ridge) {
  if (s.empty()) fail(ErrorCode::kInvalidArgument, "Nystrom landmark set must be nonempty");
  validate_subset(s, split.train.size());
  std::vector<std::size_t> landmarks;
  for (std::size_t i : s) landmarks.push_back(split.train[i]);

  const Matrix k_train = cross_kernel(data.inputs, split.train, split.train, recipe);
  const Matrix c_train = columns(k_train, s);
  const Matrix w_pinv = psd_pinv(principal_submatrix(k_train, s));
  Matrix k_hat = c_train * w_pinv * c_train.transpose();
  k_hat = 0.5 * (k_hat + k_hat.transpose()).eval();

  const auto n_train = static_cast<Eigen::Index>(split.train.size());
  Vector y_train(n_train);
  for (Eigen::Index i = 0; i < n_train; ++i) y_train(i) = data.targets(split.train[i]);
  Eigen::LLT<Matrix> llt(k_hat + ridge * Matrix::Identity(n_train, n_train));
  if (llt.info() != Eigen::Success) {
    fail(ErrorCode::kSingularMatrix, "ridge system is singular; increase the ridge parameter");
  }
  const Vector alpha = llt.solve(y_train);

  const Matrix k_test_s = cross_kernel(data.inputs, split.test, landmarks, recipe);
  const Vector pred = k_test_s * (w_pinv * (c_train.transpose() * alpha));
  double se = 0.0;
  for (std::size_t i = 0; i < split.test.size(); ++i) {
    const double e = pred(static_cast<Eigen::Index>(i)) - data.targets(split.test[i]);
    se += e * e;
  }
  NystromResult out;
  out.subset.assign(s.begin(), s.end());
  out.frobenius_error = (k_train - k_hat).norm();
  out.rmse = split.test.empty() ? 0.0 : std::sqrt(se / static_cast<double>(split.test.size()));
  return out;
}

std::vector<NystromRow> nystrom_compare(const NystromSuiteConfig& cfg) {
  if (cfg.sizes.empty() || cfg.methods.empty()) {
    fail(ErrorCode::kConfig, "Nystrom suite needs sizes and methods");
  }
  for (Method m : cfg.methods) {
    if (m == Method::kDppnet || m == Method::kDppnetMode || m == Method::kInhibAttn) {
      fail(ErrorCode::kConfig, "Nystrom suite supports dpp, kdpp, uniform and kmedoids");
    }
  }
  std::vector<std::vector<NystromRow>> per_seed(cfg.seeds);
  detail::parallel_for(cfg.seeds, cfg.threads, [&](std::size_t s) {
    const std::uint64_t seed = derive_seed(cfg.base_seed, s);
    const TrainTestSplit split = split_80_20(cfg.data.inputs.items(), seed);
    Matrix x_train(split.train.size(), cfg.data.inputs.dim());
    for (std::size_t i = 0; i < split.train.size(); ++i) {
      x_train.row(i) = cfg.data.inputs.data().row(split.train[i]);
    }
    const FeatureMatrix train_features(std::move(x_train));
    const Dpp dpp(cfg.recipe.build(train_features));
    for (Method m : cfg.methods) {
      for (std::size_t size : cfg.sizes) {
        const Method effective = m == Method::kDpp ? Method::kKdpp : m;
        SamplerRequest req{effective, size, {},
                           derive_seed(seed, name_hash(to_string(m)) ^ size)};
        const SamplerContext ctx{&dpp, &train_features, nullptr};
        const Subset landmarks = draw_sample(ctx, req);
        const auto res = nystrom_regression_rmse(cfg.data, cfg.recipe, split, landmarks, cfg.ridge);
        per_seed[s].push_back({std::string(to_string(m)), size, res.frobenius_error, res.rmse, s});
      }
    }
  });
  std::vector<NystromRow> rows;
  for (auto& r : per_seed) rows.insert(rows.end(), r.begin(), r.end());
  return rows;
}

void write_nystrom_csv(std::ostream& out, const std::vector<NystromRow>& rows) {
  out << "method,subset_size,frobenius_error,rmse,seed\n";
  out.precision(10);
  for (const auto& r : rows) {
    out << r.method << ',' << r.subset_size << ',' << r.frobenius_error << ',' << r.rmse << ','
        << r.seed << '\n';
  }
}

TimingReport timing_benchmark(const FeatureMatrix& ground_set, const KernelRecipe& recipe,
                              const SurrogateModel& model, const TimingConfig& cfg) {
  if (cfg.repeats == 0 || cfg.batch == 0) fail(ErrorCode::kConfig, "timing needs repeats and batch > 0");
  check_compatible(model, &ground_set);
  const auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };

  TimingRow exact{"dpp", 0.0, {}, 0};
  TimingRow surrogate{"dppnet", 0.0, {}, 0};
  Rng rng(cfg.seed);
  std::size_t sink = 0;
  BatchForwardCache prepared;
  forward_batch(model, &ground_set, std::vector<std::vector<std::size_t>>(1), prepared);
  for (std::size_t r = 0; r < cfg.repeats; ++r) {
    auto start = Clock::now();
    {
      const Dpp dpp(recipe.build(ground_set));
      for (std::size_t b = 0; b < cfg.batch; ++b) sink += sample_kdpp(dpp, cfg.k, rng).front();
    }
    exact.runs.push_back(seconds_since(start));

    std::size_t calls = 0;
    start = Clock::now();
    sink += sample_surrogate_batch(model, &ground_set, cfg.k, cfg.batch, {}, rng, prepared, &calls)
                .front()
                .front();
    surrogate.runs.push_back(seconds_since(start));
    surrogate.forward_calls = calls;
  }
  exact.median_seconds = median(exact.runs);
  surrogate.median_seconds = median(surrogate.runs);
  TimingReport report;
  report.ratio = surrogate.median_seconds > 0.0 ? exact.median_seconds / surrogate.median_seconds
                                                : std::numeric_limits<double>::infinity();
  report.rows = {exact, surrogate};
  if (sink == std::numeric_limits<std::size_t>::max()) report.ratio = 0.0;  // keep draws observable
  return report;
}

void write_timing_csv(std::ostream& out, const TimingReport& report, std::size_t k,
                      std::size_t batch) {
  out << "method,k,batch,median_seconds,forward_calls,ratio_exact_over_surrogate\n";
  out.precision(10);
  for (const auto& r : report.rows) {
    out << r.method << ',' << k << ',' << batch << ',' << r.median_seconds << ','
        << r.forward_calls << ',' << report.ratio << '\n';
  }
}

KernelMatrix equicorrelated_kernel(std::size_t n, double rho) {
  Matrix l = Matrix::Constant(n, n, rho);
  l.diagonal().setOnes();
  return KernelMatrix(std::move(l));
}

Theorem1Report theorem1_check(const SetFunctionTable& table, std::size_t trials, Rng& rng) {
  Theorem1Report rep;
  rep.trials = trials;
  rep.epsilon = submodularity_margin(table);
  if (!(rep.epsilon > 0.0) || !std::isfinite(rep.epsilon)) {
    rep.precondition_ok = false;
    rep.message = "precondition violated: source table margin " + std::to_string(rep.epsilon) +
                  " is not strictly positive";
    return rep;
  }
  rep.precondition_ok = true;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  const double bound = rep.epsilon / 4.0;
  std::uniform_real_distribution<double> noise(-bound, bound);
  SetFunctionTable perturbed = table;
  for (std::size_t t = 0; t < trials; ++t) {
    for (std::size_t i = 0; i < table.values.size(); ++i) perturbed.values[i] = table.values[i] + noise(rng);
    const auto res = submodularity_margin_pair(perturbed);
    rep.worst_margin = std::min(rep.worst_margin, res.margin);
    if (res.margin >= 0.0) {
      ++rep.passes;
    } else {
      rep.violations.emplace_back(res.s, res.t);
    }
  }
  rep.message = std::to_string(rep.passes) + "/" + std::to_string(trials) +
                " perturbed tables submodular";
  return rep;
}

Theorem1Report theorem1_check(std::size_t n, std::size_t trials, Rng& rng, double rho) {
  if (n < 2 || n > 6) fail(ErrorCode::kConfig, "perturbation check supports 2 <= n <= 6");
  const Dpp dpp(equicorrelated_kernel(n, rho));
  return theorem1_check(enumerate_log_probs(dpp), trials, rng);
}

SetFunctionTable adversarial_perturbation(const SetFunctionTable& table, double factor) {
  const auto pair = submodularity_margin_pair(table);
  const double delta = factor * std::abs(pair.margin);
  SetFunctionTable out = table;
  out[pair.s] -= delta;
  out[pair.t] -= delta;
  out[pair.s | pair.t] += delta;
  out[pair.s & pair.t] += delta;
  return out;
}

SetFunctionTable induced_log_inclusion_table(const SurrogateModel& model) {
  if (model.mode != SurrogateMode::kStatic) {
    fail(ErrorCode::kInvalidArgument, "induced tables need a static model");
  }
  SetFunctionTable table = SetFunctionTable::zeros(model.n_max);
  ForwardCache cache;
  for (std::uint32_t mask = 1; mask < table.values.size(); ++mask) {
    const Subset s = from_mask(mask);
    double total = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      const Vector q = forward(model, nullptr, std::span(s.data(), j), cache);
      total += std::log(q(static_cast<Eigen::Index>(s[j])));
    }
    table[mask] = total;
  }
  return table;
}

SetFunctionTable log_inclusion_table(const Dpp& dpp) {
  SetFunctionTable table = SetFunctionTable::zeros(dpp.size());
  const KernelMatrix k = marginal_kernel(dpp);
  for (std::uint32_t mask = 1; mask < table.values.size(); ++mask) {
    const Subset s = from_mask(mask);
    Eigen::LLT<Matrix> llt(principal_submatrix(k.data(), s));
    table[mask] = llt.info() == Eigen::Success
                      ? 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum()
                      : -std::numeric_limits<double>::infinity();
  }
  return table;
}

InducedMarginReport induced_margin_check(const Dpp& dpp, const SurrogateModel& model) {
  if (model.n_max != dpp.size()) fail(ErrorCode::kShapeMismatch, "model and DPP sizes differ");
  InducedMarginReport rep;
  const SetFunctionTable exact = log_inclusion_table(dpp);
  const SetFunctionTable induced = induced_log_inclusion_table(model);
  rep.epsilon = submodularity_margin(exact);
  for (std::size_t m = 0; m < exact.values.size(); ++m) {
    rep.table_sup_error = std::max(rep.table_sup_error, std::abs(exact.values[m] - induced.values[m]));
  }
  ForwardCache cache;
  for (std::uint32_t mask = 0; mask + 1 < exact.values.size(); ++mask) {
    const Subset s = from_mask(mask);
    const Vector v = conditional_marginals(dpp, s);
    const Vector q = forward(model, nullptr, s, cache);
    rep.marginal_sup_error = std::max(rep.marginal_sup_error, (q - v).cwiseAbs().maxCoeff());
  }
  rep.induced_margin = submodularity_margin(induced);
  rep.gate_met = rep.table_sup_error <= rep.epsilon / 4.0;
  return rep;
}

}  // namespace dppnet
