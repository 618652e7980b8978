#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dppnet/kernels.hpp"
#include "dppnet/samplers.hpp"
#include "dppnet/surrogate.hpp"
#include "dppnet/synthetic.hpp"
#include "dppnet/training.hpp"

namespace dppnet {

inline constexpr int kConfigVersion = 1;

enum class GroundSetKind { kGrid, kFeatures, kSynthetic };

struct GroundSetConfig {
  GroundSetKind kind = GroundSetKind::kGrid;
  std::size_t grid_m = 10;
  std::filesystem::path features_path;
  SyntheticFeatureSpec synthetic;
};

struct DatasetConfig {
  std::size_t paths = 2000;           // static: k-DPP draws on the fixed kernel
  std::size_t matrices = 300;         // dynamic: fresh feature matrices
  std::size_t paths_per_matrix = 4;   // dynamic: draws per matrix
  std::size_t k = 20;
};

struct SampleConfig {
  Method method = Method::kDpp;
  std::size_t k = 20;
  std::size_t n = 10;
  Subset condition;
};

struct NllEvalConfig {
  std::vector<Method> methods;
  std::size_t k = 20;
  std::size_t draws = 100;
  std::size_t ground_sets = 1;  // dynamic: held-out feature matrices
};

struct NystromEvalConfig {
  std::optional<std::filesystem::path> data_path;
  SyntheticRegressionSpec synthetic;
  double ridge = 1e-3;
  std::vector<std::size_t> sizes{5, 10, 20, 40, 80};
  std::vector<Method> methods{Method::kKdpp, Method::kUniform};
  std::size_t seeds = 20;
};

struct TimingEvalConfig {
  std::size_t k = 20;
  std::size_t batch = 32;
  std::size_t repeats = 5;
};

struct Theorem1EvalConfig {
  std::size_t n = 3;
  std::size_t trials = 1000;
  double rho = 0.5;
  double adversarial_factor = 10.0;
};

struct RunConfig {
  std::filesystem::path source;  // config file, when loaded from disk
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  KernelRecipe kernel;
  GroundSetConfig ground_set;
  ModelSpec model;
  DatasetConfig dataset;
  TrainConfig train;
  SampleConfig sample;
  NllEvalConfig nll;
  NystromEvalConfig nystrom;
  TimingEvalConfig timing;
  Theorem1EvalConfig theorem1;
  std::filesystem::path output_dir = "out";
  std::filesystem::path checkpoint;  // defaults to <output_dir>/checkpoint.json

  std::filesystem::path checkpoint_path() const;
};

// Parses and validates a config; errors are kConfig naming the field path.
// Relative paths resolve against `base_dir`.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

// Fixed ground set of the config (grid, features file, or the first synthetic
// matrix drawn from the ground-set stream).
FeatureMatrix base_ground_set(const RunConfig& cfg);

// Held-out ground sets for evaluation: the base ground set for grid/features,
// or `count` synthetic matrices from a stream disjoint from training.
std::vector<FeatureMatrix> evaluation_ground_sets(const RunConfig& cfg, std::size_t count);

// Training paths for the configured model mode.
PathDataset build_dataset(const RunConfig& cfg);

// Seed streams derived from the config seed.
std::uint64_t stream_seed(const RunConfig& cfg, std::string_view purpose);

}  // namespace dppnet
