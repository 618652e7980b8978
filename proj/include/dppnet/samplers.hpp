#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dppnet/dpp.hpp"
#include "dppnet/surrogate.hpp"

namespace dppnet {

enum class Method { kDpp, kKdpp, kDppnet, kDppnetMode, kUniform, kKmedoids, kInhibAttn };

// CLI-facing names: dpp, kdpp, dppnet, dppnet-mode, uniform, kmedoids, inhib-attn.
std::string_view to_string(Method m);
Method parse_method(std::string_view name);
std::span<const Method> all_methods();
bool needs_model(Method m);

struct SamplerRequest {
  Method method = Method::kUniform;
  std::size_t k = 0;
  Subset condition;  // seed set A, kept at the front of the result
  std::uint64_t seed = 0;
};

// Predicted next-item scores for a prefix; entries in the prefix must be 0.
using MarginalPredictor = std::function<Vector(std::span<const std::size_t>)>;

// Algorithm-1 loop: starting from `condition`, repeatedly draws the next item
// with probability proportional to its predicted score until |S| = k.
// `calls`, when non-null, is incremented once per predictor call.
Subset sample_sequential(const MarginalPredictor& predict, std::size_t n, std::size_t k,
                         std::span<const std::size_t> condition, Rng& rng,
                         std::size_t* calls = nullptr);
// Same loop with argmax (lowest index on ties) instead of a draw.
Subset mode_sequential(const MarginalPredictor& predict, std::size_t n, std::size_t k,
                       std::span<const std::size_t> condition, std::size_t* calls = nullptr);

Subset sample_surrogate(const SurrogateModel& model, const FeatureMatrix* phi, std::size_t k,
                        std::span<const std::size_t> condition, Rng& rng,
                        std::size_t* calls = nullptr);
Subset sample_mode(const SurrogateModel& model, const FeatureMatrix* phi, std::size_t k,
                   std::span<const std::size_t> condition, std::size_t* calls = nullptr);

// `batch` independent sample_surrogate draws advanced in lockstep, one batched
// forward pass per step. Draws for entry b come from rng in batch order.
std::vector<Subset> sample_surrogate_batch(const SurrogateModel& model, const FeatureMatrix* phi,
                                           std::size_t k, std::size_t batch,
                                           std::span<const std::size_t> condition, Rng& rng,
                                           std::size_t* calls = nullptr);
// Same, reusing converted weights held in cache across calls.
std::vector<Subset> sample_surrogate_batch(const SurrogateModel& model, const FeatureMatrix* phi,
                                           std::size_t k, std::size_t batch,
                                           std::span<const std::size_t> condition, Rng& rng,
                                           BatchForwardCache& cache, std::size_t* calls = nullptr);

// Uniform without replacement (partial Fisher-Yates).
Subset sample_uniform(std::size_t n, std::size_t k, Rng& rng);

// PAM-style alternation under Euclidean distance from uniformly seeded
// medoids; stops at a fixed point or after max_iterations.
Subset kmedoids(const FeatureMatrix& phi, std::size_t k, Rng& rng,
                std::size_t max_iterations = 100);

// First item uniform, then draws from the inhibitive attention of the prefix.
Subset sample_attention_only(const FeatureMatrix& phi, std::size_t k, Rng& rng);

// Everything a sampler may need; unused members may be null.
struct SamplerContext {
  const Dpp* dpp = nullptr;
  const FeatureMatrix* features = nullptr;
  const SurrogateModel* model = nullptr;
};

// Dispatches on req.method. DPP methods condition exactly through the
// conditioned kernel; uniform, kmedoids and inhib-attn reject a nonempty
// condition with kUnsupported. The rng is seeded from req.seed.
Subset draw_sample(const SamplerContext& ctx, const SamplerRequest& req);

}  // namespace dppnet
