#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dppnet/dpp.hpp"
#include "dppnet/surrogate.hpp"

namespace dppnet {

struct PathRecord {
  std::size_t matrix_id = 0;
  Subset prefix;
  Vector target;  // conditional marginals of prefix
};

// Sampling-path training data. Static datasets carry one feature matrix (or
// none); dynamic datasets carry one per distinct ground set.
struct PathDataset {
  SurrogateMode mode = SurrogateMode::kStatic;
  std::vector<FeatureMatrix> features;
  std::vector<PathRecord> records;

  const FeatureMatrix* features_for(const PathRecord& r) const {
    return features.empty() ? nullptr : &features[r.matrix_id];
  }
};

// Draws feature matrices for dynamic datasets.
using FeatureSampler = std::function<FeatureMatrix(Rng&)>;

// n_paths k-DPP draws over a fixed kernel; k records per path (prefix sizes
// 0..k-1). Path p uses the stream derive_seed(seed, p).
PathDataset generate_static_dataset(const Dpp& dpp, std::size_t n_paths, std::size_t k,
                                    std::uint64_t seed,
                                    std::optional<FeatureMatrix> features = std::nullopt,
                                    std::size_t threads = 1);

// n_matrices ground sets from `sampler`, each with paths_per_matrix k-DPP
// draws under `recipe`.
PathDataset generate_dynamic_dataset(const FeatureSampler& sampler, const KernelRecipe& recipe,
                                     std::size_t n_matrices, std::size_t paths_per_matrix,
                                     std::size_t k, std::uint64_t seed, std::size_t threads = 1);

// Records of one path: prefixes of `path` of sizes 0..path.size()-1.
void append_path_records(const Dpp& dpp, std::size_t matrix_id, std::span<const std::size_t> path,
                         std::vector<PathRecord>& out);

// CSV cache: matrix_id,prefix,target with semicolon-joined fields.
void save_dataset_records(const PathDataset& ds, const std::filesystem::path& path);
std::vector<PathRecord> load_dataset_records(const std::filesystem::path& path);

enum class LossKind { kSquaredL2, kL1, kKl };

LossKind parse_loss_kind(std::string_view name);
std::string_view to_string(LossKind kind);

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::kSquaredL2;

  void validate() const;
};

inline constexpr double kKlClamp = 1e-7;

struct LossValue {
  double loss = 0.0;
  double grad_norm = 0.0;  // |dloss/dq| over unmasked items
  double alpha = 1.0;      // norm-equivalence constant for the loss norm
};

// max over |x|_inf = 1 of 1/|x| for the loss norm: a single unit spike
// minimizes the L1 and L2 norms on that sphere, so both give 1.
double norm_equivalence_alpha(LossKind kind);

// Loss of masked predictions against targets. Items flagged in `mask` are
// outside the loss path. Writes dloss/dq into grad when non-null.
LossValue loss(std::span<const double> pred, std::span<const double> target, LossKind kind,
               std::span<const std::uint8_t> mask = {}, std::span<double> grad = {});

struct Gradients {
  std::vector<DenseLayer> layers;

  static Gradients zeros_like(const MlpParams& mlp);
  void set_zero();
  double squared_norm() const;
};

struct BatchResult {
  Gradients grads;
  double mean_loss = 0.0;
};

// Batch-mean loss and its gradient for every dense parameter. Attention is a
// fixed feature map (no trainable weights). Throws kDivergence on non-finite
// activations.
BatchResult backward(const SurrogateModel& model, const PathDataset& ds,
                     std::span<const std::size_t> batch, LossKind kind);

struct OptimizerState {
  std::vector<DenseLayer> m;
  std::vector<DenseLayer> v;
  std::uint64_t t = 0;

  static OptimizerState for_model(const MlpParams& mlp);
};

void adam_step(MlpParams& mlp, const Gradients& grads, OptimizerState& state,
               const TrainConfig& cfg);

struct TrainResult {
  SurrogateModel model;
  std::vector<double> loss_curve;  // per-epoch mean training loss
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

TrainResult train(SurrogateModel model, const PathDataset& ds, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

// Mean loss over the whole dataset without updating the model.
double evaluate_loss(const SurrogateModel& model, const PathDataset& ds, LossKind kind);

}  // namespace dppnet
