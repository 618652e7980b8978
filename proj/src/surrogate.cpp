#include "dppnet/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dppnet/error.hpp"
#include "dppnet/simd.hpp"

namespace dppnet {

AttentionConfig AttentionConfig::for_dim(std::size_t d) {
  if (d == 0) fail(ErrorCode::kInvalidArgument, "attention dimension must be positive");
  return AttentionConfig{d, 1.0 / std::sqrt(static_cast<double>(d))};
}

Vector inhibitive_attention(const FeatureMatrix& phi, std::span<const std::size_t> s) {
  return inhibitive_attention(phi, s, AttentionConfig::for_dim(phi.dim()));
}

Vector inhibitive_attention(const FeatureMatrix& phi, std::span<const std::size_t> s,
                            const AttentionConfig& cfg) {
  const std::size_t n = phi.items();
  const std::size_t d = phi.dim();
  if (cfg.dim != d) fail(ErrorCode::kShapeMismatch, "attention dim does not match features");
  Vector a = Vector::Constant(static_cast<Eigen::Index>(n), 1.0);
  if (s.empty()) return a / static_cast<double>(n);

  const auto& kern = simd::active();
  Vector logits(static_cast<Eigen::Index>(n));
  for (std::size_t i : s) {
    if (i >= n) fail(ErrorCode::kInvalidArgument, "attention query index out of range");
    kern.gemv(phi.data().data(), n, d, phi.row(i).data(), nullptr, logits.data());
    logits *= cfg.scale;
    const double top = logits.maxCoeff();
    logits = (logits.array() - top).exp().matrix();
    logits /= logits.sum();
    // dissimilarity row 1 - softmax
    logits = (1.0 - logits.array()).matrix();
    kern.mul_inplace(logits.data(), a.data(), n);
  }
  const double total = a.sum();
  if (!(total > std::numeric_limits<double>::min()) || !std::isfinite(total)) {
    fail(ErrorCode::kDegenerateAttention, "inhibitive attention vanished for every item");
  }
  return a / total;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t count = 0;
  for (const auto& l : layers) count += static_cast<std::size_t>(l.w.size() + l.b.size());
  return count;
}

void MlpParams::validate() const {
  if (layers.empty()) fail(ErrorCode::kShapeMismatch, "network has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.w.rows() == 0 || l.w.cols() == 0 || l.b.size() != l.w.rows()) {
      fail(ErrorCode::kShapeMismatch, "layer " + std::to_string(i) + " has inconsistent shape");
    }
    if (i > 0 && layers[i - 1].out() != l.in()) {
      fail(ErrorCode::kShapeMismatch, "layer " + std::to_string(i) + " input width " +
                                          std::to_string(l.in()) + " does not chain with " +
                                          std::to_string(layers[i - 1].out()));
    }
    if (!l.w.allFinite() || !l.b.allFinite()) {
      fail(ErrorCode::kShapeMismatch, "layer " + std::to_string(i) + " has non-finite parameters");
    }
  }
}

std::size_t SurrogateModel::input_width() const {
  return mode == SurrogateMode::kStatic ? n_max : n_max * (dim + 1);
}

void SurrogateModel::validate() const {
  if (n_max == 0) fail(ErrorCode::kShapeMismatch, "n_max must be positive");
  if (mode == SurrogateMode::kDynamic && dim == 0) {
    fail(ErrorCode::kShapeMismatch, "dynamic model needs a feature dimension");
  }
  mlp.validate();
  if (mlp.input_width() != input_width()) {
    fail(ErrorCode::kShapeMismatch, "first layer width " + std::to_string(mlp.input_width()) +
                                        " does not match expected input width " +
                                        std::to_string(input_width()));
  }
  if (mlp.output_width() != n_max) {
    fail(ErrorCode::kShapeMismatch, "output width " + std::to_string(mlp.output_width()) +
                                        " does not match n_max " + std::to_string(n_max));
  }
}

SurrogateModel init_params(const ModelSpec& spec, std::uint64_t seed) {
  SurrogateModel model;
  model.mode = spec.mode;
  model.n_max = spec.n_max;
  model.dim = spec.mode == SurrogateMode::kDynamic ? spec.dim : 0;
  model.use_attention = spec.use_attention;
  if (model.mode == SurrogateMode::kDynamic) model.attention = AttentionConfig::for_dim(model.dim);

  std::vector<std::size_t> widths{model.input_width()};
  widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
  widths.push_back(spec.n_max);
  for (std::size_t w : widths) {
    if (w == 0) fail(ErrorCode::kInvalidArgument, "layer widths must be positive");
  }

  Rng rng(seed);
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const std::size_t fan_in = widths[i];
    const std::size_t fan_out = widths[i + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseLayer layer{Matrix(fan_out, fan_in), Vector::Zero(static_cast<Eigen::Index>(fan_out))};
    for (Eigen::Index k = 0; k < layer.w.size(); ++k) layer.w.data()[k] = dist(rng);
    model.mlp.layers.push_back(std::move(layer));
  }
  model.validate();
  return model;
}

void check_compatible(const SurrogateModel& model, const FeatureMatrix* phi) {
  if (model.mode == SurrogateMode::kStatic) {
    if (phi != nullptr && phi->items() != model.n_max) {
      fail(ErrorCode::kShapeMismatch, "ground set size " + std::to_string(phi->items()) +
                                          " does not match static model n_max " +
                                          std::to_string(model.n_max));
    }
    return;
  }
  if (phi == nullptr) fail(ErrorCode::kShapeMismatch, "dynamic model needs a feature matrix");
  if (phi->items() != model.n_max || phi->dim() != model.dim) {
    fail(ErrorCode::kShapeMismatch,
         "feature matrix " + std::to_string(phi->items()) + "x" + std::to_string(phi->dim()) +
             " incompatible with dynamic model " + std::to_string(model.n_max) + "x" +
             std::to_string(model.dim));
  }
}

void build_input(const SurrogateModel& model, const FeatureMatrix* phi,
                 std::span<const std::size_t> s, Vector& input) {
  input.setZero(static_cast<Eigen::Index>(model.input_width()));
  if (model.mode == SurrogateMode::kStatic) {
    for (std::size_t i : s) input(static_cast<Eigen::Index>(i)) = 1.0;
    return;
  }
  const std::size_t n = model.n_max;
  const std::size_t d = model.dim;
  const Vector a = model.use_attention
                       ? inhibitive_attention(*phi, s, model.attention)
                       : Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n));
  for (std::size_t j = 0; j < n; ++j) {
    double* dst = input.data() + j * (d + 1);
    const auto row = phi->row(j);
    for (std::size_t c = 0; c < d; ++c) dst[c] = a(j) * row[c];
    dst[d] = a(j);
  }
}

void mlp_forward(const MlpParams& mlp, ForwardCache& cache) {
  const auto& kern = simd::active();
  const std::size_t depth = mlp.layers.size();
  cache.activations.resize(depth + 1);
  for (std::size_t l = 0; l < depth; ++l) {
    const auto& layer = mlp.layers[l];
    Vector& out = cache.activations[l + 1];
    out.resize(layer.w.rows());
    kern.gemv(layer.w.data(), layer.out(), layer.in(), cache.activations[l].data(),
              layer.b.data(), out.data());
    if (l + 1 < depth) {
      out = out.cwiseMax(0.0);
    } else {
      out = (1.0 / (1.0 + (-out.array()).exp())).matrix();
    }
  }
}

Vector forward(const SurrogateModel& model, const FeatureMatrix* phi,
               std::span<const std::size_t> s) {
  ForwardCache cache;
  return forward(model, phi, s, cache);
}

Vector forward(const SurrogateModel& model, const FeatureMatrix* phi,
               std::span<const std::size_t> s, ForwardCache& cache) {
  check_compatible(model, phi);
  for (std::size_t i : s) {
    if (i >= model.n_max) fail(ErrorCode::kShapeMismatch, "subset index exceeds model n_max");
  }
  if (cache.activations.empty()) cache.activations.resize(1);
  build_input(model, phi, s, cache.activations[0]);
  mlp_forward(model.mlp, cache);
  Vector q = cache.activations.back();
  for (std::size_t i : s) q(static_cast<Eigen::Index>(i)) = 0.0;
  return q;
}

Matrix forward_batch(const SurrogateModel& model, const FeatureMatrix* phi,
                     std::span<const std::vector<std::size_t>> prefixes, BatchForwardCache& cache) {
  check_compatible(model, phi);
  const auto& kern = simd::active();
  const std::size_t batch = prefixes.size();
  const std::size_t n = model.n_max;
  const auto& layers = model.mlp.layers;
  for (const auto& s : prefixes) {
    for (std::size_t i : s) {
      if (i >= n) fail(ErrorCode::kShapeMismatch, "subset index exceeds model n_max");
    }
  }
  // Layer widths are zero-padded to a multiple of 8 so the vector kernels run
  // without scalar tails; padded units stay 0 through ReLU and feed 0 weights.
  const auto padded = [](std::size_t w) { return (w + 7) / 8 * 8; };
  if (cache.model != &model) {
    cache.model = &model;
    cache.summed.clear();
    cache.weights_t.clear();
    cache.biases.clear();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& layer = layers[l];
      const std::size_t in = l == 0 ? layer.in() : padded(layer.in());
      const std::size_t out = padded(layer.out());
      std::vector<float> wt(in * out, 0.0f);
      for (std::size_t c = 0; c < layer.in(); ++c) {
        for (std::size_t r = 0; r < layer.out(); ++r) wt[c * out + r] = static_cast<float>(layer.w(r, c));
      }
      std::vector<float> bias(out, 0.0f);
      for (std::size_t r = 0; r < layer.out(); ++r) bias[r] = static_cast<float>(layer.b(r));
      cache.weights_t.push_back(std::move(wt));
      cache.biases.push_back(std::move(bias));
    }
  }
  cache.activations.resize(layers.size() + 1);

  const bool sparse_input = model.mode == SurrogateMode::kStatic;
  std::size_t first = 0;
  if (sparse_input) {
    // Rows whose prefix extends the previous call's prefix by one item only
    // add that item's column.
    const std::size_t width = cache.biases.front().size();
    if (cache.summed.size() != batch) {
      cache.summed.assign(batch, {});
      cache.first_sums.resize(batch * width);
      for (std::size_t b = 0; b < batch; ++b) {
        std::copy(cache.biases.front().begin(), cache.biases.front().end(),
                  cache.first_sums.begin() + static_cast<std::ptrdiff_t>(b * width));
      }
    }
    for (std::size_t b = 0; b < batch; ++b) {
      float* row = cache.first_sums.data() + b * width;
      const auto& s = prefixes[b];
      auto& prev = cache.summed[b];
      std::size_t from = 0;
      if (prev.size() <= s.size() && std::equal(prev.begin(), prev.end(), s.begin())) {
        from = prev.size();
      } else {
        std::copy(cache.biases.front().begin(), cache.biases.front().end(), row);
      }
      for (std::size_t j = from; j < s.size(); ++j) {
        kern.axpy_f32(1.0f, cache.weights_t.front().data() + s[j] * width, row, width);
      }
      prev = s;
    }
    cache.activations[1] = cache.first_sums;
    first = 1;
  } else {
    const std::size_t width = model.input_width();
    auto& x = cache.activations[0];
    x.resize(batch * width);
    Vector input;
    for (std::size_t b = 0; b < batch; ++b) {
      build_input(model, phi, prefixes[b], input);
      std::copy(input.data(), input.data() + width, x.data() + b * width);
    }
  }

  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& out = cache.activations[l + 1];
    if (l >= first) {
      const std::size_t rows = cache.biases[l].size();
      const std::size_t cols = cache.weights_t[l].size() / rows;
      out.resize(batch * rows);
      kern.gemm_f32(cache.weights_t[l].data(), rows, cols, cache.activations[l].data(), batch,
                    cache.biases[l].data(), out.data());
    }
    if (l + 1 < layers.size()) {
      for (float& v : out) v = v > 0.0f ? v : 0.0f;
    } else {
      for (float& v : out) v = 1.0f / (1.0f + std::exp(-v));
    }
  }

  Matrix q(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(n));
  const std::size_t stride = cache.biases.back().size();
  for (std::size_t b = 0; b < batch; ++b) {
    const float* src = cache.activations.back().data() + b * stride;
    std::copy(src, src + n, q.data() + b * n);
  }
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i : prefixes[b]) q(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(i)) = 0.0;
  }
  return q;
}

namespace {

using nlohmann::json;

std::vector<double> flatten(const Matrix& m) {
  return std::vector<double>(m.data(), m.data() + m.size());
}

}  // namespace

std::string checkpoint_to_json(const SurrogateModel& model) {
  json j;
  j["version"] = kCheckpointVersion;
  j["mode"] = model.mode == SurrogateMode::kStatic ? "static" : "dynamic";
  j["n_max"] = model.n_max;
  if (model.mode == SurrogateMode::kDynamic) {
    j["d"] = model.dim;
    j["attention"] = model.use_attention ? "inhibitive" : "none";
  } else {
    j["d"] = nullptr;
  }
  json layers = json::array();
  for (const auto& l : model.mlp.layers) {
    layers.push_back({{"rows", l.w.rows()},
                      {"cols", l.w.cols()},
                      {"w", flatten(l.w)},
                      {"b", std::vector<double>(l.b.data(), l.b.data() + l.b.size())}});
  }
  j["layers"] = std::move(layers);
  return j.dump();
}

SurrogateModel checkpoint_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kParse, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("version").get<int>() != kCheckpointVersion) {
      fail(ErrorCode::kCheckpoint, "unsupported checkpoint version " + j.at("version").dump());
    }
    SurrogateModel model;
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "static") {
      model.mode = SurrogateMode::kStatic;
    } else if (mode == "dynamic") {
      model.mode = SurrogateMode::kDynamic;
    } else {
      fail(ErrorCode::kCheckpoint, "unknown checkpoint mode '" + mode + "'");
    }
    model.n_max = j.at("n_max").get<std::size_t>();
    if (model.mode == SurrogateMode::kDynamic) {
      model.dim = j.at("d").get<std::size_t>();
      model.attention = AttentionConfig::for_dim(model.dim);
      model.use_attention = j.value("attention", std::string("inhibitive")) != "none";
    }
    for (const auto& jl : j.at("layers")) {
      const auto rows = jl.at("rows").get<Eigen::Index>();
      const auto cols = jl.at("cols").get<Eigen::Index>();
      const auto w = jl.at("w").get<std::vector<double>>();
      const auto b = jl.at("b").get<std::vector<double>>();
      if (rows <= 0 || cols <= 0 || static_cast<Eigen::Index>(w.size()) != rows * cols ||
          static_cast<Eigen::Index>(b.size()) != rows) {
        fail(ErrorCode::kShapeMismatch, "checkpoint layer arrays do not match declared rows/cols");
      }
      DenseLayer layer{Matrix(rows, cols), Vector(rows)};
      std::copy(w.begin(), w.end(), layer.w.data());
      std::copy(b.begin(), b.end(), layer.b.data());
      model.mlp.layers.push_back(std::move(layer));
    }
    model.validate();
    return model;
  } catch (const json::exception& e) {
    fail(ErrorCode::kCheckpoint, std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const SurrogateModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write checkpoint " + path.string());
  out << checkpoint_to_json(model) << '\n';
  if (!out) fail(ErrorCode::kIo, "failed writing checkpoint " + path.string());
}

SurrogateModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kMissingArtifact, "cannot read checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_json(buf.str());
}

}  // namespace dppnet
