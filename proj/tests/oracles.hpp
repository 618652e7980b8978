#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <span>

#include "dppnet/dpp.hpp"
#include "dppnet/training.hpp"
#include "dppnet/types.hpp"

namespace testing {

using namespace dppnet;

// Random Gram matrix B B^T with B of shape n x rank, entries N(0, 1/sqrt(rank)).
inline KernelMatrix random_kernel(std::size_t n, Rng& rng, std::size_t rank = 0) {
  if (rank == 0) rank = n;
  std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(static_cast<double>(rank)));
  Matrix b(n, rank);
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = g(rng);
  Matrix l = b * b.transpose();
  l = 0.5 * (l + l.transpose()).eval();
  return KernelMatrix(std::move(l));
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

// Total variation between empirical mask counts and a probability table.
inline double tv_distance(const std::map<std::uint32_t, std::size_t>& counts, std::size_t draws,
                          const SetFunctionTable& probs) {
  double tv = 0.0;
  for (std::uint32_t m = 0; m < probs.values.size(); ++m) {
    const auto it = counts.find(m);
    const double freq = it == counts.end() ? 0.0 : static_cast<double>(it->second) / draws;
    tv += std::abs(freq - probs[m]);
  }
  return 0.5 * tv;
}

// Central differences (h = 1e-5) of the batch-mean loss for one parameter.
inline double numeric_derivative(SurrogateModel model, const PathDataset& ds,
                                 std::span<const std::size_t> batch, LossKind kind,
                                 std::size_t layer, bool bias, Eigen::Index index) {
  const double h = 1e-5;
  auto& layer_ref = model.mlp.layers[layer];
  double& p = bias ? layer_ref.b(index) : layer_ref.w.data()[index];
  const double orig = p;
  p = orig + h;
  const double up = backward(model, ds, batch, kind).mean_loss;
  p = orig - h;
  const double down = backward(model, ds, batch, kind).mean_loss;
  return (up - down) / (2.0 * h);
}

// Largest relative error between backprop and finite differences over every
// parameter of every layer.
inline double max_gradient_error(const SurrogateModel& model, const PathDataset& ds,
                                 std::span<const std::size_t> batch, LossKind kind) {
  const auto res = backward(model, ds, batch, kind);
  double worst = 0.0;
  const auto rel = [](double an, double fd) {
    return std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-7});
  };
  for (std::size_t l = 0; l < model.mlp.layers.size(); ++l) {
    const auto& g = res.grads.layers[l];
    for (Eigen::Index i = 0; i < g.w.size(); ++i) {
      worst = std::max(worst, rel(g.w.data()[i], numeric_derivative(model, ds, batch, kind, l, false, i)));
    }
    for (Eigen::Index i = 0; i < g.b.size(); ++i) {
      worst = std::max(worst, rel(g.b(i), numeric_derivative(model, ds, batch, kind, l, true, i)));
    }
  }
  return worst;
}

// Initialized model with random biases, which move pre-activations off the
// rectifier kink at zero.
inline SurrogateModel random_model(const ModelSpec& spec, std::uint64_t seed) {
  auto model = init_params(spec, seed);
  Rng rng(seed + 100);
  for (auto& l : model.mlp.layers) {
    l.b = random_matrix(static_cast<std::size_t>(l.b.size()), 1, rng, 0.3);
  }
  return model;
}

}  // namespace testing
