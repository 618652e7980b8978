#pragma once

#include <filesystem>
#include <string>

#include "dppnet/kernels.hpp"
#include "dppnet/types.hpp"

namespace dppnet {

// Feature generators for the dynamic-ground-set experiments.
//
//  gaussian-mixture: rows drawn around `clusters` centers ~ N(0, I), spread
//                    `spread`; every matrix has fresh centers.
//  jittered-layout:  a fixed layout (latent points uniform in [0,1]^latent_dim,
//                    embedded into d dims by a fixed orthonormal map, both from
//                    layout_seed) plus per-matrix Gaussian jitter of scale
//                    `spread` on every coordinate.
struct SyntheticFeatureSpec {
  std::string kind = "jittered-layout";
  std::size_t items = 100;
  std::size_t dim = 8;
  std::size_t latent_dim = 2;
  std::size_t clusters = 5;
  double spread = 0.03;
  std::uint64_t layout_seed = 1;
};

FeatureMatrix synthetic_features(const SyntheticFeatureSpec& spec, Rng& rng);

struct RegressionData {
  FeatureMatrix inputs;
  Vector targets;
};

// Clustered Gaussian inputs with a smooth target plus Gaussian noise.
struct SyntheticRegressionSpec {
  std::size_t items = 400;
  std::size_t dim = 4;
  std::size_t clusters = 3;
  double cluster_spread = 0.35;
  double noise = 0.05;
};

RegressionData synthetic_regression(const SyntheticRegressionSpec& spec, Rng& rng);

// CSV with one row per example; last column is the target.
RegressionData load_regression_csv(const std::filesystem::path& path);

}  // namespace dppnet
