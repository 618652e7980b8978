#include "dppnet/samplers.hpp"

#include <array>
#include <limits>
#include <numeric>
#include <string>

#include "dppnet/error.hpp"
#include "dppnet/random.hpp"
#include "dppnet/simd.hpp"

namespace dppnet {

namespace {

constexpr std::array<Method, 7> kMethods = {Method::kDpp,      Method::kKdpp,
                                            Method::kDppnet,   Method::kDppnetMode,
                                            Method::kUniform,  Method::kKmedoids,
                                            Method::kInhibAttn};

void check_request(std::size_t n, std::size_t k, std::span<const std::size_t> condition) {
  validate_subset(condition, n);
  if (condition.size() > k) {
    fail(ErrorCode::kInvalidArgument, "conditioning set larger than requested size k");
  }
  if (k > n) {
    fail(ErrorCode::kInfeasibleSize, "requested size " + std::to_string(k) +
                                         " exceeds ground set of " + std::to_string(n));
  }
}

void reject_condition(Method m, std::span<const std::size_t> condition) {
  if (!condition.empty()) {
    fail(ErrorCode::kUnsupported,
         "method '" + std::string(to_string(m)) + "' does not support conditioning");
  }
}

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::kDpp: return "dpp";
    case Method::kKdpp: return "kdpp";
    case Method::kDppnet: return "dppnet";
    case Method::kDppnetMode: return "dppnet-mode";
    case Method::kUniform: return "uniform";
    case Method::kKmedoids: return "kmedoids";
    case Method::kInhibAttn: return "inhib-attn";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (Method m : kMethods) {
    if (to_string(m) == name) return m;
  }
  fail(ErrorCode::kConfig, "unknown method '" + std::string(name) +
                               "' (expected dpp, kdpp, dppnet, dppnet-mode, uniform, kmedoids, "
                               "inhib-attn)");
}

std::span<const Method> all_methods() { return kMethods; }

bool needs_model(Method m) { return m == Method::kDppnet || m == Method::kDppnetMode; }

Subset sample_sequential(const MarginalPredictor& predict, std::size_t n, std::size_t k,
                         std::span<const std::size_t> condition, Rng& rng, std::size_t* calls) {
  check_request(n, k, condition);
  Subset s(condition.begin(), condition.end());
  std::vector<double> weights(n);
  while (s.size() < k) {
    const Vector q = predict(s);
    if (calls) ++*calls;
    for (std::size_t i = 0; i < n; ++i) weights[i] = q(static_cast<Eigen::Index>(i));
    for (std::size_t i : s) weights[i] = 0.0;
    s.push_back(draw_categorical(weights, rng));
  }
  return s;
}

Subset mode_sequential(const MarginalPredictor& predict, std::size_t n, std::size_t k,
                       std::span<const std::size_t> condition, std::size_t* calls) {
  check_request(n, k, condition);
  Subset s(condition.begin(), condition.end());
  std::vector<std::uint8_t> taken(n, 0);
  for (std::size_t i : s) taken[i] = 1;
  std::vector<double> scores(n);
  while (s.size() < k) {
    const Vector q = predict(s);
    if (calls) ++*calls;
    for (std::size_t i = 0; i < n; ++i) scores[i] = q(static_cast<Eigen::Index>(i));
    const std::size_t next = argmax_lowest(scores, taken);
    if (!(scores[next] > 0.0)) {
      fail(ErrorCode::kDegenerateDistribution, "every remaining item has zero predicted score");
    }
    s.push_back(next);
    taken[next] = 1;
  }
  return s;
}

Subset sample_surrogate(const SurrogateModel& model, const FeatureMatrix* phi, std::size_t k,
                        std::span<const std::size_t> condition, Rng& rng, std::size_t* calls) {
  check_compatible(model, phi);
  ForwardCache cache;
  const MarginalPredictor predict = [&](std::span<const std::size_t> s) {
    return forward(model, phi, s, cache);
  };
  return sample_sequential(predict, model.n_max, k, condition, rng, calls);
}

Subset sample_mode(const SurrogateModel& model, const FeatureMatrix* phi, std::size_t k,
                   std::span<const std::size_t> condition, std::size_t* calls) {
  check_compatible(model, phi);
  ForwardCache cache;
  const MarginalPredictor predict = [&](std::span<const std::size_t> s) {
    return forward(model, phi, s, cache);
  };
  return mode_sequential(predict, model.n_max, k, condition, calls);
}

std::vector<Subset> sample_surrogate_batch(const SurrogateModel& model, const FeatureMatrix* phi,
                                           std::size_t k, std::size_t batch,
                                           std::span<const std::size_t> condition, Rng& rng,
                                           std::size_t* calls) {
  BatchForwardCache cache;
  return sample_surrogate_batch(model, phi, k, batch, condition, rng, cache, calls);
}

std::vector<Subset> sample_surrogate_batch(const SurrogateModel& model, const FeatureMatrix* phi,
                                           std::size_t k, std::size_t batch,
                                           std::span<const std::size_t> condition, Rng& rng,
                                           BatchForwardCache& cache, std::size_t* calls) {
  check_compatible(model, phi);
  const std::size_t n = model.n_max;
  check_request(n, k, condition);
  std::vector<Subset> out(batch, Subset(condition.begin(), condition.end()));
  std::vector<double> weights(n);
  for (std::size_t step = condition.size(); step < k; ++step) {
    const Matrix q = forward_batch(model, phi, out, cache);
    if (calls) *calls += batch;
    for (std::size_t b = 0; b < batch; ++b) {
      const double* row = q.data() + b * n;
      weights.assign(row, row + n);
      out[b].push_back(draw_categorical(weights, rng));
    }
  }
  return out;
}

Subset sample_uniform(std::size_t n, std::size_t k, Rng& rng) {
  if (k > n) fail(ErrorCode::kInfeasibleSize, "uniform sample size exceeds ground set");
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  return pool;
}

Subset kmedoids(const FeatureMatrix& phi, std::size_t k, Rng& rng, std::size_t max_iterations) {
  const std::size_t n = phi.items();
  if (k > n) fail(ErrorCode::kInfeasibleSize, "k-medoids k exceeds ground set");
  if (k == 0) return {};

  Matrix dist(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    dist(i, i) = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      dist(i, j) = dist(j, i) = std::sqrt(simd::squared_distance(phi.row(i), phi.row(j)));
    }
  }

  Subset medoids = sample_uniform(n, k, rng);
  std::vector<std::size_t> owner(n);
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    for (auto& m : members) m.clear();
    for (std::size_t p = 0; p < n; ++p) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < k; ++c) {
        if (dist(p, medoids[c]) < dist(p, medoids[best])) best = c;
      }
      owner[p] = best;
      members[best].push_back(p);
    }
    bool changed = false;
    for (std::size_t c = 0; c < k; ++c) {
      if (members[c].empty()) continue;
      std::size_t best = medoids[c];
      double best_cost = 0.0;
      for (std::size_t q : members[c]) best_cost += dist(best, q);
      for (std::size_t cand : members[c]) {
        double cost = 0.0;
        for (std::size_t q : members[c]) cost += dist(cand, q);
        if (cost < best_cost) {
          best_cost = cost;
          best = cand;
        }
      }
      if (best != medoids[c]) {
        medoids[c] = best;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return medoids;
}

Subset sample_attention_only(const FeatureMatrix& phi, std::size_t k, Rng& rng) {
  const std::size_t n = phi.items();
  if (k > n) fail(ErrorCode::kInfeasibleSize, "sample size exceeds ground set");
  const auto cfg = AttentionConfig::for_dim(phi.dim());
  const MarginalPredictor predict = [&](std::span<const std::size_t> s) {
    Vector a = inhibitive_attention(phi, s, cfg);
    for (std::size_t i : s) a(static_cast<Eigen::Index>(i)) = 0.0;
    return a;
  };
  return sample_sequential(predict, n, k, {}, rng);
}

namespace {

Subset lift(std::span<const std::size_t> condition, const std::vector<std::size_t>& rest,
            const Subset& local) {
  Subset out(condition.begin(), condition.end());
  for (std::size_t i : local) out.push_back(rest[i]);
  return out;
}

}  // namespace

Subset draw_sample(const SamplerContext& ctx, const SamplerRequest& req) {
  Rng rng(req.seed);
  const auto need = [&](const void* p, const char* what) {
    if (p == nullptr) {
      fail(ErrorCode::kMissingArtifact,
           std::string("method '") + std::string(to_string(req.method)) + "' needs " + what);
    }
  };
  switch (req.method) {
    case Method::kDpp:
    case Method::kKdpp: {
      need(ctx.dpp, "a kernel");
      validate_subset(req.condition, ctx.dpp->size());
      if (req.condition.empty()) {
        return req.method == Method::kDpp ? sample_exact(*ctx.dpp, rng)
                                          : sample_kdpp(*ctx.dpp, req.k, rng);
      }
      if (req.method == Method::kKdpp && req.condition.size() > req.k) {
        fail(ErrorCode::kInvalidArgument, "conditioning set larger than requested size k");
      }
      const auto rest = complement(req.condition, ctx.dpp->size());
      const Dpp conditioned(condition_kernel(*ctx.dpp, req.condition));
      if (req.method == Method::kDpp) return lift(req.condition, rest, sample_exact(conditioned, rng));
      if (req.k == req.condition.size()) return Subset(req.condition.begin(), req.condition.end());
      return lift(req.condition, rest, sample_kdpp(conditioned, req.k - req.condition.size(), rng));
    }
    case Method::kDppnet:
      need(ctx.model, "a trained checkpoint");
      return sample_surrogate(*ctx.model, ctx.features, req.k, req.condition, rng);
    case Method::kDppnetMode:
      need(ctx.model, "a trained checkpoint");
      return sample_mode(*ctx.model, ctx.features, req.k, req.condition);
    case Method::kUniform: {
      reject_condition(req.method, req.condition);
      const std::size_t n = ctx.features ? ctx.features->items() : (ctx.dpp ? ctx.dpp->size() : 0);
      if (n == 0) fail(ErrorCode::kMissingArtifact, "uniform sampling needs a ground set");
      return sample_uniform(n, req.k, rng);
    }
    case Method::kKmedoids:
      reject_condition(req.method, req.condition);
      need(ctx.features, "a feature matrix");
      return kmedoids(*ctx.features, req.k, rng);
    case Method::kInhibAttn:
      reject_condition(req.method, req.condition);
      need(ctx.features, "a feature matrix");
      return sample_attention_only(*ctx.features, req.k, rng);
  }
  fail(ErrorCode::kInvalidArgument, "unknown method");
}

}  // namespace dppnet
