#include "dppnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dppnet/error.hpp"
#include "dppnet/simd.hpp"
#include "parallel.hpp"

namespace dppnet {

using detail::parallel_for;

void append_path_records(const Dpp& dpp, std::size_t matrix_id, std::span<const std::size_t> path,
                         std::vector<PathRecord>& out) {
  for (std::size_t len = 0; len < path.size(); ++len) {
    Subset prefix(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(len));
    Vector target = conditional_marginals(dpp, prefix);
    out.push_back(PathRecord{matrix_id, std::move(prefix), std::move(target)});
  }
}

PathDataset generate_static_dataset(const Dpp& dpp, std::size_t n_paths, std::size_t k,
                                    std::uint64_t seed, std::optional<FeatureMatrix> features,
                                    std::size_t threads) {
  if (k == 0) fail(ErrorCode::kInfeasibleSize, "path length k must be at least 1");
  std::vector<std::vector<PathRecord>> per_path(n_paths);
  parallel_for(n_paths, threads, [&](std::size_t p) {
    Rng rng(derive_seed(seed, p));
    const Subset path = sample_kdpp(dpp, k, rng);
    append_path_records(dpp, 0, path, per_path[p]);
  });
  PathDataset ds;
  ds.mode = SurrogateMode::kStatic;
  if (features) ds.features.push_back(std::move(*features));
  ds.records.reserve(n_paths * k);
  for (auto& recs : per_path) {
    std::move(recs.begin(), recs.end(), std::back_inserter(ds.records));
  }
  return ds;
}

PathDataset generate_dynamic_dataset(const FeatureSampler& sampler, const KernelRecipe& recipe,
                                     std::size_t n_matrices, std::size_t paths_per_matrix,
                                     std::size_t k, std::uint64_t seed, std::size_t threads) {
  if (k == 0) fail(ErrorCode::kInfeasibleSize, "path length k must be at least 1");
  std::vector<std::optional<FeatureMatrix>> mats(n_matrices);
  std::vector<std::vector<PathRecord>> per_matrix(n_matrices);
  parallel_for(n_matrices, threads, [&](std::size_t m) {
    Rng rng(derive_seed(seed, m));
    FeatureMatrix phi = sampler(rng);
    const Dpp dpp(recipe.build(phi));
    for (std::size_t p = 0; p < paths_per_matrix; ++p) {
      const Subset path = sample_kdpp(dpp, k, rng);
      append_path_records(dpp, m, path, per_matrix[m]);
    }
    mats[m].emplace(std::move(phi));
  });
  PathDataset ds;
  ds.mode = SurrogateMode::kDynamic;
  for (std::size_t m = 0; m < n_matrices; ++m) {
    ds.features.push_back(std::move(*mats[m]));
    std::move(per_matrix[m].begin(), per_matrix[m].end(), std::back_inserter(ds.records));
  }
  return ds;
}

void save_dataset_records(const PathDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write dataset cache " + path.string());
  out << "matrix_id,prefix,target\n";
  char buf[32];
  for (const auto& r : ds.records) {
    out << r.matrix_id << ',';
    for (std::size_t i = 0; i < r.prefix.size(); ++i) out << (i ? ";" : "") << r.prefix[i];
    out << ',';
    for (Eigen::Index i = 0; i < r.target.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", r.target(i));
      out << (i ? ";" : "") << buf;
    }
    out << '\n';
  }
}

std::vector<PathRecord> load_dataset_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot read dataset cache " + path.string());
  std::vector<PathRecord> records;
  std::string line;
  std::getline(in, line);  // header
  std::size_t line_no = 1;
  const auto split = [](const std::string& s, char delim) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, delim)) out.push_back(item);
    return out;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    if (cols.size() < 2 || cols.size() > 3) {
      fail(ErrorCode::kFormat, "dataset cache line " + std::to_string(line_no) + " malformed");
    }
    try {
      PathRecord r;
      r.matrix_id = std::stoull(cols[0]);
      for (const auto& s : split(cols[1], ';')) r.prefix.push_back(std::stoull(s));
      const auto vals = cols.size() == 3 ? split(cols[2], ';') : std::vector<std::string>{};
      r.target.resize(static_cast<Eigen::Index>(vals.size()));
      for (std::size_t i = 0; i < vals.size(); ++i) r.target(i) = std::stod(vals[i]);
      records.push_back(std::move(r));
    } catch (const std::logic_error&) {
      fail(ErrorCode::kParse, "dataset cache line " + std::to_string(line_no) + " has bad numbers");
    }
  }
  return records;
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "squared-l2" || name == "l2") return LossKind::kSquaredL2;
  if (name == "l1") return LossKind::kL1;
  if (name == "kl") return LossKind::kKl;
  fail(ErrorCode::kConfig, "unknown loss '" + std::string(name) + "' (expected squared-l2, l1, kl)");
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kSquaredL2: return "squared-l2";
    case LossKind::kL1: return "l1";
    case LossKind::kKl: return "kl";
  }
  return "?";
}

void TrainConfig::validate() const {
  const auto in_unit = [](double x) { return x > 0.0 && x < 1.0; };
  if (!in_unit(learning_rate) || !in_unit(beta1) || !in_unit(beta2) || !in_unit(epsilon)) {
    fail(ErrorCode::kConfig, "optimizer rates must lie in (0, 1)");
  }
  if (batch_size == 0) fail(ErrorCode::kConfig, "batch size must be positive");
}

double norm_equivalence_alpha(LossKind) { return 1.0; }

LossValue loss(std::span<const double> pred, std::span<const double> target, LossKind kind,
               std::span<const std::uint8_t> mask, std::span<double> grad) {
  if (pred.size() != target.size() || (!mask.empty() && mask.size() != pred.size()) ||
      (!grad.empty() && grad.size() != pred.size())) {
    fail(ErrorCode::kShapeMismatch, "loss inputs have mismatched lengths");
  }
  const std::size_t n = pred.size();
  const double inv_n = n == 0 ? 0.0 : 1.0 / static_cast<double>(n);
  LossValue out;
  out.alpha = norm_equivalence_alpha(kind);
  double grad_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double g = 0.0;
    if (mask.empty() || !mask[i]) {
      const double q = pred[i];
      const double v = target[i];
      switch (kind) {
        case LossKind::kSquaredL2:
          out.loss += (q - v) * (q - v) * inv_n;
          g = 2.0 * (q - v) * inv_n;
          break;
        case LossKind::kL1:
          out.loss += std::abs(q - v) * inv_n;
          g = (q > v ? 1.0 : (q < v ? -1.0 : 0.0)) * inv_n;
          break;
        case LossKind::kKl: {
          const double qc = std::clamp(q, kKlClamp, 1.0 - kKlClamp);
          if (v > 0.0) out.loss += v * std::log(v / qc);
          if (v < 1.0) out.loss += (1.0 - v) * std::log((1.0 - v) / (1.0 - qc));
          if (q == qc) g = (qc - v) / (qc * (1.0 - qc));
          break;
        }
      }
    }
    if (!grad.empty()) grad[i] = g;
    grad_sq += g * g;
  }
  out.grad_norm = std::sqrt(grad_sq);
  return out;
}

Gradients Gradients::zeros_like(const MlpParams& mlp) {
  Gradients g;
  for (const auto& l : mlp.layers) {
    g.layers.push_back(DenseLayer{Matrix::Zero(l.w.rows(), l.w.cols()), Vector::Zero(l.b.size())});
  }
  return g;
}

void Gradients::set_zero() {
  for (auto& l : layers) {
    l.w.setZero();
    l.b.setZero();
  }
}

double Gradients::squared_norm() const {
  double s = 0.0;
  for (const auto& l : layers) s += l.w.squaredNorm() + l.b.squaredNorm();
  return s;
}

namespace {

struct BackpropWorkspace {
  ForwardCache cache;
  std::vector<std::uint8_t> mask;
  std::vector<double> masked_pred;
  std::vector<double> dq;
  Vector delta;
  Vector delta_prev;
};

// Adds one record's loss gradient (unscaled) into grads; returns its loss.
double accumulate_record(const SurrogateModel& model, const PathDataset& ds,
                         std::size_t record_index, LossKind kind, Gradients& grads,
                         BackpropWorkspace& ws) {
  const auto& kern = simd::active();
  const PathRecord& rec = ds.records[record_index];
  const FeatureMatrix* phi = ds.features_for(rec);
  const std::size_t n = model.n_max;
  if (static_cast<std::size_t>(rec.target.size()) != n) {
    fail(ErrorCode::kShapeMismatch, "record target length does not match model n_max");
  }

  if (ws.cache.activations.empty()) ws.cache.activations.resize(1);
  build_input(model, phi, rec.prefix, ws.cache.activations[0]);
  mlp_forward(model.mlp, ws.cache);
  const Vector& q = ws.cache.activations.back();

  ws.mask.assign(n, 0);
  for (std::size_t i : rec.prefix) ws.mask[i] = 1;
  ws.masked_pred.assign(q.data(), q.data() + n);
  for (std::size_t i : rec.prefix) ws.masked_pred[i] = 0.0;
  ws.dq.resize(n);
  const LossValue lv = loss(ws.masked_pred, {rec.target.data(), n}, kind, ws.mask, ws.dq);
  if (!std::isfinite(lv.loss) || !q.allFinite()) {
    fail(ErrorCode::kDivergence, "non-finite activation on record " + std::to_string(record_index));
  }

  // through the logistic output
  ws.delta.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) ws.delta(i) = ws.dq[i] * q(i) * (1.0 - q(i));

  for (std::size_t l = model.mlp.layers.size(); l-- > 0;) {
    const DenseLayer& layer = model.mlp.layers[l];
    DenseLayer& g = grads.layers[l];
    const Vector& input = ws.cache.activations[l];
    g.b += ws.delta;
    for (Eigen::Index o = 0; o < ws.delta.size(); ++o) {
      const double d = ws.delta(o);
      if (d == 0.0) continue;
      kern.axpy(d, input.data(), g.w.data() + o * g.w.cols(), layer.in());
    }
    if (l == 0) break;
    ws.delta_prev.setZero(static_cast<Eigen::Index>(layer.in()));
    for (Eigen::Index o = 0; o < ws.delta.size(); ++o) {
      const double d = ws.delta(o);
      if (d == 0.0) continue;
      kern.axpy(d, layer.w.data() + o * layer.w.cols(), ws.delta_prev.data(), layer.in());
    }
    // rectifier derivative
    for (Eigen::Index i = 0; i < ws.delta_prev.size(); ++i) {
      if (!(input(i) > 0.0)) ws.delta_prev(i) = 0.0;
    }
    std::swap(ws.delta, ws.delta_prev);
  }
  return lv.loss;
}

void batch_gradients(const SurrogateModel& model, const PathDataset& ds,
                     std::span<const std::size_t> batch, LossKind kind, Gradients& grads,
                     BackpropWorkspace& ws, double& mean_loss) {
  if (batch.empty()) fail(ErrorCode::kInvalidArgument, "batch must be nonempty");
  grads.set_zero();
  double total = 0.0;
  for (std::size_t idx : batch) total += accumulate_record(model, ds, idx, kind, grads, ws);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& l : grads.layers) {
    l.w *= inv;
    l.b *= inv;
  }
  mean_loss = total * inv;
}

}  // namespace

BatchResult backward(const SurrogateModel& model, const PathDataset& ds,
                     std::span<const std::size_t> batch, LossKind kind) {
  BatchResult out{Gradients::zeros_like(model.mlp), 0.0};
  BackpropWorkspace ws;
  batch_gradients(model, ds, batch, kind, out.grads, ws, out.mean_loss);
  return out;
}

OptimizerState OptimizerState::for_model(const MlpParams& mlp) {
  OptimizerState s;
  s.m = Gradients::zeros_like(mlp).layers;
  s.v = s.m;
  return s;
}

void adam_step(MlpParams& mlp, const Gradients& grads, OptimizerState& state,
               const TrainConfig& cfg) {
  if (state.m.size() != mlp.layers.size() || grads.layers.size() != mlp.layers.size()) {
    fail(ErrorCode::kShapeMismatch, "optimizer state does not match model");
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  const auto update = [&](double* p, const double* g, double* m, double* v, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
  };
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    auto& p = mlp.layers[l];
    const auto& g = grads.layers[l];
    update(p.w.data(), g.w.data(), state.m[l].w.data(), state.v[l].w.data(), p.w.size());
    update(p.b.data(), g.b.data(), state.m[l].b.data(), state.v[l].b.data(), p.b.size());
  }
}

TrainResult train(SurrogateModel model, const PathDataset& ds, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  model.validate();
  if (ds.records.empty()) fail(ErrorCode::kInvalidArgument, "training dataset is empty");
  if (ds.mode != model.mode) {
    fail(ErrorCode::kShapeMismatch, "dataset mode does not match model mode");
  }
  if (model.mode == SurrogateMode::kDynamic) {
    for (const auto& f : ds.features) check_compatible(model, &f);
  }

  TrainResult result{std::move(model), {}};
  OptimizerState state = OptimizerState::for_model(result.model.mlp);
  Gradients grads = Gradients::zeros_like(result.model.mlp);
  BackpropWorkspace ws;
  std::vector<std::size_t> order(ds.records.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(cfg.seed);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_no) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      const std::span<const std::size_t> batch(order.data() + start, len);
      double mean = 0.0;
      try {
        batch_gradients(result.model, ds, batch, cfg.loss, grads, ws, mean);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kDivergence) throw;
        fail(ErrorCode::kDivergence, std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(batch_no) + ")");
      }
      adam_step(result.model.mlp, grads, state, cfg);
      total += mean * static_cast<double>(len);
    }
    const double epoch_loss = total / static_cast<double>(order.size());
    result.loss_curve.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  return result;
}

double evaluate_loss(const SurrogateModel& model, const PathDataset& ds, LossKind kind) {
  if (ds.records.empty()) return 0.0;
  std::vector<std::size_t> all(ds.records.size());
  std::iota(all.begin(), all.end(), 0);
  return backward(model, ds, all, kind).mean_loss;
}

}  // namespace dppnet
