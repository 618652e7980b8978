#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "dppnet/config.hpp"
#include "dppnet/error.hpp"
#include "dppnet/eval.hpp"

namespace fs = std::filesystem;
using namespace dppnet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitMissing = 4;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingArtifact:
    case ErrorCode::kIo:
    case ErrorCode::kCheckpoint:
      return kExitMissing;
    case ErrorCode::kNotPsd:
    case ErrorCode::kSingularMatrix:
    case ErrorCode::kInfeasibleSize:
    case ErrorCode::kImpossibleCondition:
    case ErrorCode::kDegenerateAttention:
    case ErrorCode::kDegenerateDistribution:
    case ErrorCode::kDivergence:
      return kExitNumerical;
    default:
      return kExitConfig;
  }
}

struct Options {
  std::string config;
  std::string out;
  std::size_t threads = 0;
};

RunConfig load(const Options& opt) {
  RunConfig cfg = load_config(opt.config);
  if (!opt.out.empty()) cfg.output_dir = opt.out;
  if (opt.threads > 0) cfg.threads = opt.threads;
  return cfg;
}

std::ofstream open_output(const RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.output_dir);
  const fs::path path = cfg.output_dir / name;
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

SurrogateModel load_model(const RunConfig& cfg) {
  const fs::path path = cfg.checkpoint_path();
  if (!fs::exists(path)) {
    fail(ErrorCode::kMissingArtifact, "checkpoint not found: " + path.string() + " (run train first)");
  }
  return load_checkpoint(path);
}

std::string join_items(const Subset& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(s[i]);
  }
  return out;
}

Subset parse_condition(const std::string& text) {
  Subset out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ';')) {
    if (cell.empty()) continue;
    std::size_t used = 0;
    long long v = -1;
    try {
      v = std::stoll(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != cell.size() || v < 0) {
      fail(ErrorCode::kConfig, "--condition: '" + cell + "' is not an item index");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

int cmd_train(const Options& opt) {
  const RunConfig cfg = load(opt);
  std::cout << "generating dataset" << std::endl;
  const PathDataset ds = build_dataset(cfg);
  std::cout << "records " << ds.records.size() << std::endl;
  const SurrogateModel init = init_params(cfg.model, stream_seed(cfg, "init"));
  const double initial = evaluate_loss(init, ds, cfg.train.loss);
  std::printf("epoch 0 loss %.8g\n", initial);
  const TrainResult res = train(init, ds, cfg.train, [](std::size_t epoch, double loss) {
    std::printf("epoch %zu loss %.8g\n", epoch + 1, loss);
    std::fflush(stdout);
  });
  fs::create_directories(cfg.checkpoint_path().parent_path().empty()
                             ? fs::path(".")
                             : cfg.checkpoint_path().parent_path());
  save_checkpoint(res.model, cfg.checkpoint_path());
  auto csv = open_output(cfg, "loss.csv");
  csv << "epoch,mean_loss\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "0,%.17g\n", initial);
  csv << buf;
  for (std::size_t e = 0; e < res.loss_curve.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e + 1, res.loss_curve[e]);
    csv << buf;
  }
  const double final_loss = res.loss_curve.empty() ? initial : res.loss_curve.back();
  std::printf("final loss %.8g\n", final_loss);
  std::cout << "checkpoint " << cfg.checkpoint_path().string() << '\n';
  return kExitOk;
}

int cmd_sample(const Options& opt, const std::string& method_name, std::size_t k, std::size_t n,
               const std::string& condition, bool has_condition) {
  RunConfig cfg = load(opt);
  if (!method_name.empty()) {
    try {
      cfg.sample.method = parse_method(method_name);
    } catch (const Error& e) {
      fail(ErrorCode::kConfig, std::string("--method: ") + e.what());
    }
  }
  if (k > 0) cfg.sample.k = k;
  if (n > 0) cfg.sample.n = n;
  if (has_condition) cfg.sample.condition = parse_condition(condition);

  const FeatureMatrix phi = base_ground_set(cfg);
  for (std::size_t i : cfg.sample.condition) {
    if (i >= phi.items()) {
      fail(ErrorCode::kConfig, "--condition: item " + std::to_string(i) + " out of range [0, " +
                                   std::to_string(phi.items()) + ")");
    }
  }
  if (cfg.sample.condition.size() > cfg.sample.k) {
    fail(ErrorCode::kConfig, "--condition has more items than --k");
  }
  if (cfg.sample.k > phi.items()) fail(ErrorCode::kConfig, "--k exceeds the ground-set size");

  const Dpp dpp(cfg.kernel.build(phi));
  std::optional<SurrogateModel> model;
  if (needs_model(cfg.sample.method)) model = load_model(cfg);
  const SamplerContext ctx{&dpp, &phi, model ? &*model : nullptr};

  auto csv = open_output(cfg, "samples.csv");
  const std::string header = "sample_id,items,path,nll\n";
  csv << header;
  std::cout << header;
  const std::uint64_t base = stream_seed(cfg, "sample");
  for (std::size_t id = 0; id < cfg.sample.n; ++id) {
    const SamplerRequest req{cfg.sample.method, cfg.sample.k, cfg.sample.condition,
                             derive_seed(base, id)};
    const Subset path = draw_sample(ctx, req);
    Subset items = path;
    std::sort(items.begin(), items.end());
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", nll(dpp, items));
    const std::string row = std::to_string(id) + "," + join_items(items) + "," + join_items(path) +
                            "," + buf + "\n";
    csv << row;
    std::cout << row;
  }
  return kExitOk;
}

int eval_nll(const RunConfig& cfg) {
  NllSuiteConfig sc;
  sc.methods = cfg.nll.methods;
  sc.k = cfg.nll.k;
  sc.draws = cfg.nll.draws;
  sc.seed = stream_seed(cfg, "eval-nll");
  sc.ground_sets = evaluation_ground_sets(cfg, cfg.nll.ground_sets);
  sc.recipe = cfg.kernel;
  sc.threads = cfg.threads;
  std::optional<SurrogateModel> model;
  for (Method m : sc.methods) {
    if (needs_model(m) && !model) model = load_model(cfg);
  }
  sc.model = model ? &*model : nullptr;
  const auto reports = compare_methods(sc);
  auto csv = open_output(cfg, "nll.csv");
  write_nll_csv(csv, reports);
  std::printf("%-12s %8s %12s %10s %10s\n", "method", "draws", "mean_nll", "stderr", "per_item");
  for (const auto& r : reports) {
    std::printf("%-12s %8zu %12.4f %10.4f %10.4f\n", r.method.c_str(), r.count(), r.mean,
                r.stderr_, r.per_item_mean);
  }
  return kExitOk;
}

int eval_nystrom(const RunConfig& cfg) {
  NystromSuiteConfig sc{
      cfg.nystrom.data_path
          ? load_regression_csv(*cfg.nystrom.data_path)
          : [&] {
              Rng rng(stream_seed(cfg, "nystrom-data"));
              return synthetic_regression(cfg.nystrom.synthetic, rng);
            }(),
      cfg.kernel, cfg.nystrom.ridge, cfg.nystrom.sizes, cfg.nystrom.methods, cfg.nystrom.seeds,
      stream_seed(cfg, "eval-nystrom"), cfg.threads};
  const auto rows = nystrom_compare(sc);
  auto csv = open_output(cfg, "nystrom.csv");
  write_nystrom_csv(csv, rows);
  std::map<std::pair<std::string, std::size_t>, std::pair<double, double>> sums;
  for (const auto& r : rows) {
    auto& s = sums[{r.method, r.subset_size}];
    s.first += r.rmse;
    s.second += r.frobenius_error;
  }
  std::printf("%-10s %6s %12s %14s\n", "method", "size", "mean_rmse", "mean_frobenius");
  for (const auto& [key, s] : sums) {
    const double n = static_cast<double>(sc.seeds);
    std::printf("%-10s %6zu %12.6f %14.6f\n", key.first.c_str(), key.second, s.first / n,
                s.second / n);
  }
  return kExitOk;
}

int eval_timing(const RunConfig& cfg) {
  const SurrogateModel model = load_model(cfg);
  const FeatureMatrix phi = base_ground_set(cfg);
  const TimingConfig tc{cfg.timing.k, cfg.timing.batch, cfg.timing.repeats,
                        stream_seed(cfg, "eval-timing")};
  const TimingReport rep = timing_benchmark(phi, cfg.kernel, model, tc);
  auto csv = open_output(cfg, "timing.csv");
  write_timing_csv(csv, rep, tc.k, tc.batch);
  for (const auto& r : rep.rows) {
    std::printf("%-8s median %.6f s per batch of %zu, forward calls %zu\n", r.method.c_str(),
                r.median_seconds, tc.batch, r.forward_calls);
  }
  std::printf("ratio exact/surrogate %.3f\n", rep.ratio);
  return kExitOk;
}

int eval_theorem1(const RunConfig& cfg) {
  Rng rng(stream_seed(cfg, "eval-theorem1"));
  const auto& tc = cfg.theorem1;
  const Theorem1Report rep = theorem1_check(tc.n, tc.trials, rng, tc.rho);
  if (!rep.precondition_ok) fail(ErrorCode::kConfig, rep.message);
  const SetFunctionTable table = enumerate_log_probs(Dpp(equicorrelated_kernel(tc.n, tc.rho)));
  const double adversarial = submodularity_margin(adversarial_perturbation(table, tc.adversarial_factor));
  const bool detected = adversarial < 0.0;
  auto csv = open_output(cfg, "theorem1.csv");
  csv << "n,epsilon,trials,passes,worst_margin,adversarial_margin,adversarial_detected\n";
  csv.precision(12);
  csv << tc.n << ',' << rep.epsilon << ',' << rep.trials << ',' << rep.passes << ','
      << rep.worst_margin << ',' << adversarial << ',' << (detected ? "true" : "false") << '\n';
  std::printf("epsilon %.6g\n", rep.epsilon);
  std::printf("passes %zu/%zu\n", rep.passes, rep.trials);
  std::printf("adversarial %gx epsilon margin %.6g detected %s\n", tc.adversarial_factor,
              adversarial, detected ? "yes" : "no");
  return rep.passes == rep.trials && detected ? kExitOk : kExitNumerical;
}

int cmd_eval(const Options& opt, const std::string& suite) {
  static const char* kSuites = "nll, nystrom, timing, theorem1";
  if (suite != "nll" && suite != "nystrom" && suite != "timing" && suite != "theorem1") {
    fail(ErrorCode::kConfig, "unknown suite '" + suite + "'; valid suites: " + kSuites);
  }
  const RunConfig cfg = load(opt);
  if (suite == "nll") return eval_nll(cfg);
  if (suite == "nystrom") return eval_nystrom(cfg);
  if (suite == "timing") return eval_timing(cfg);
  return eval_theorem1(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dppkit: DPP sampling, surrogate training and evaluation"};
  app.require_subcommand(1);
  Options opt;
  const auto common = [&opt](CLI::App* sub) {
    sub->add_option("--config", opt.config, "run config JSON")->required();
    sub->add_option("--out", opt.out, "output directory (overrides output_dir)");
    sub->add_option("--threads", opt.threads, "worker thread cap")->envname("DPPKIT_THREADS");
  };

  auto* train = app.add_subcommand("train", "generate paths, train the surrogate, write checkpoint");
  common(train);

  std::string method;
  std::size_t k = 0;
  std::size_t n = 0;
  std::string condition;
  auto* sample = app.add_subcommand("sample", "draw subsets with one method");
  common(sample);
  sample->add_option("--method", method, "dpp, kdpp, dppnet, dppnet-mode, uniform, kmedoids, inhib-attn");
  sample->add_option("--k", k, "subset size");
  sample->add_option("--n", n, "number of subsets");
  auto* cond = sample->add_option("--condition", condition, "seed items, e.g. \"3;7\"");

  std::string suite;
  auto* eval = app.add_subcommand("eval", "run an evaluation suite");
  common(eval);
  eval->add_option("--suite", suite, "nll, nystrom, timing or theorem1")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*train) return cmd_train(opt);
    if (*sample) return cmd_sample(opt, method, k, n, condition, cond->count() > 0);
    return cmd_eval(opt, suite);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}
