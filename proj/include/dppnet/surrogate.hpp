#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "dppnet/kernels.hpp"
#include "dppnet/types.hpp"

namespace dppnet {

struct AttentionConfig {
  std::size_t dim = 1;
  double scale = 1.0;  // always dim^{-1/2}

  static AttentionConfig for_dim(std::size_t d);
};

// a_j proportional to prod_{i in S} (1 - softmax(phi_i Phi^T * scale))_j,
// normalized to sum 1. Uniform for empty S. Throws kDegenerateAttention when
// the product vanishes for every item.
Vector inhibitive_attention(const FeatureMatrix& phi, std::span<const std::size_t> s);
Vector inhibitive_attention(const FeatureMatrix& phi, std::span<const std::size_t> s,
                            const AttentionConfig& cfg);

struct DenseLayer {
  Matrix w;  // out x in
  Vector b;  // out

  std::size_t in() const { return static_cast<std::size_t>(w.cols()); }
  std::size_t out() const { return static_cast<std::size_t>(w.rows()); }
};

// Rectifier on hidden layers, logistic on the output layer.
struct MlpParams {
  std::vector<DenseLayer> layers;

  std::size_t input_width() const { return layers.empty() ? 0 : layers.front().in(); }
  std::size_t output_width() const { return layers.empty() ? 0 : layers.back().out(); }
  std::size_t parameter_count() const;
  // Throws kShapeMismatch if consecutive layers do not chain.
  void validate() const;
};

enum class SurrogateMode { kStatic, kDynamic };

struct SurrogateModel {
  SurrogateMode mode = SurrogateMode::kStatic;
  std::size_t n_max = 0;
  std::size_t dim = 0;          // feature dim, dynamic only
  bool use_attention = true;    // false: attention replaced by uniform (NoAttn)
  AttentionConfig attention;    // dynamic only
  MlpParams mlp;

  std::size_t input_width() const;
  // Throws kShapeMismatch on an inconsistent model.
  void validate() const;
};

struct ModelSpec {
  SurrogateMode mode = SurrogateMode::kStatic;
  std::size_t n_max = 0;
  std::size_t dim = 0;
  std::vector<std::size_t> hidden;  // widths of hidden layers
  bool use_attention = true;
};

// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
SurrogateModel init_params(const ModelSpec& spec, std::uint64_t seed);

// Scratch space for repeated forward passes; holds post-activation values of
// every layer (index 0 is the input).
struct ForwardCache {
  std::vector<Vector> activations;
};

// Dense-network input for prefix s: the multi-hot indicator (static) or the
// flattened rows [a_j * phi_j, a_j] (dynamic).
void build_input(const SurrogateModel& model, const FeatureMatrix* phi,
                 std::span<const std::size_t> s, Vector& input);

// Runs the dense stack on cache.activations[0]; fills every later activation.
void mlp_forward(const MlpParams& mlp, ForwardCache& cache);

// Scratch space for batched forward passes; tied to one model. Batched
// inference runs in single precision.
struct BatchForwardCache {
  const SurrogateModel* model = nullptr;
  std::vector<std::vector<float>> weights_t;  // per layer, in x out
  std::vector<std::vector<float>> biases;
  std::vector<std::vector<float>> activations;  // per layer, one row per prefix
  std::vector<std::vector<std::size_t>> summed;  // static models: prefixes behind first_sums
  std::vector<float> first_sums;                 // static models: first-layer pre-activations
};

// forward() for several prefixes at once in single precision: row b holds the
// masked prediction for prefixes[b]. Static models sum the first-layer
// columns of the prefix items instead of multiplying by the multi-hot input.
Matrix forward_batch(const SurrogateModel& model, const FeatureMatrix* phi,
                     std::span<const std::vector<std::size_t>> prefixes, BatchForwardCache& cache);

// Predicted conditional marginals with entries in s forced to 0.
Vector forward(const SurrogateModel& model, const FeatureMatrix* phi,
               std::span<const std::size_t> s);
Vector forward(const SurrogateModel& model, const FeatureMatrix* phi,
               std::span<const std::size_t> s, ForwardCache& cache);

// Checks that phi matches the model's expectations (presence, N, d).
void check_compatible(const SurrogateModel& model, const FeatureMatrix* phi);

inline constexpr int kCheckpointVersion = 1;

std::string checkpoint_to_json(const SurrogateModel& model);
SurrogateModel checkpoint_from_json(std::string_view text);
void save_checkpoint(const SurrogateModel& model, const std::filesystem::path& path);
SurrogateModel load_checkpoint(const std::filesystem::path& path);

}  // namespace dppnet
