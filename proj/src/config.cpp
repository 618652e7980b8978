#include "dppnet/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dppnet/error.hpp"

namespace dppnet {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& field, const std::string& what) {
  fail(ErrorCode::kConfig, "config field '" + field + "': " + what);
}

std::string join(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

const json* member(const json& obj, const std::string& parent, const std::string& key) {
  if (!obj.is_object()) config_error(parent.empty() ? "<root>" : parent, "expected an object");
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

std::size_t count(const json& obj, const std::string& parent, const std::string& key,
                  std::size_t fallback, bool positive = true) {
  const json* v = member(obj, parent, key);
  if (!v) return fallback;
  if (!v->is_number_integer() || v->get<long long>() < 0) {
    config_error(join(parent, key), "expected a nonnegative integer");
  }
  const auto out = v->get<std::size_t>();
  if (positive && out == 0) config_error(join(parent, key), "must be positive");
  return out;
}

double real(const json& obj, const std::string& parent, const std::string& key, double fallback,
            bool positive = true) {
  const json* v = member(obj, parent, key);
  if (!v) return fallback;
  if (!v->is_number()) config_error(join(parent, key), "expected a number");
  const double out = v->get<double>();
  if (!std::isfinite(out) || (positive && !(out > 0.0))) {
    config_error(join(parent, key), positive ? "must be a positive finite number" : "must be finite");
  }
  return out;
}

std::string text(const json& obj, const std::string& parent, const std::string& key,
                 const std::string& fallback) {
  const json* v = member(obj, parent, key);
  if (!v) return fallback;
  if (!v->is_string()) config_error(join(parent, key), "expected a string");
  return v->get<std::string>();
}

bool flag(const json& obj, const std::string& parent, const std::string& key, bool fallback) {
  const json* v = member(obj, parent, key);
  if (!v) return fallback;
  if (!v->is_boolean()) config_error(join(parent, key), "expected true or false");
  return v->get<bool>();
}

std::vector<std::size_t> counts(const json& obj, const std::string& parent, const std::string& key,
                                std::vector<std::size_t> fallback, bool allow_zero = false) {
  const json* v = member(obj, parent, key);
  if (!v) return fallback;
  if (!v->is_array()) config_error(join(parent, key), "expected an array of integers");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < v->size(); ++i) {
    const json& e = (*v)[i];
    const std::string field = join(parent, key) + "[" + std::to_string(i) + "]";
    if (!e.is_number_integer() || e.get<long long>() < 0) config_error(field, "expected a nonnegative integer");
    if (!allow_zero && e.get<long long>() == 0) config_error(field, "must be positive");
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

Method method_at(const json& v, const std::string& field) {
  if (!v.is_string()) config_error(field, "expected a method name");
  try {
    return parse_method(v.get<std::string>());
  } catch (const Error& e) {
    config_error(field, e.what());
  }
}

std::vector<Method> methods(const json& obj, const std::string& parent, const std::string& key,
                            std::vector<Method> fallback) {
  const json* v = member(obj, parent, key);
  if (!v) return fallback;
  if (!v->is_array() || v->empty()) config_error(join(parent, key), "expected a nonempty array");
  std::vector<Method> out;
  for (std::size_t i = 0; i < v->size(); ++i) {
    out.push_back(method_at((*v)[i], join(parent, key) + "[" + std::to_string(i) + "]"));
  }
  return out;
}

const json& section(const json& root, const std::string& parent, const std::string& key) {
  static const json empty = json::object();
  const json* v = member(root, parent, key);
  if (!v) return empty;
  if (!v->is_object()) config_error(join(parent, key), "expected an object");
  return *v;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void parse_kernel(const json& root, RunConfig& cfg) {
  const json& k = section(root, "", "kernel");
  const std::string type = text(k, "kernel", "type", "exp-quadratic");
  if (type == "exp-quadratic") {
    cfg.kernel.type = KernelType::kExpQuadratic;
  } else if (type == "linear") {
    cfg.kernel.type = KernelType::kLinear;
  } else {
    config_error("kernel.type", "expected exp-quadratic or linear, got '" + type + "'");
  }
  cfg.kernel.beta = real(k, "kernel", "beta", 0.5);
}

void parse_ground_set(const json& root, const std::filesystem::path& base, RunConfig& cfg) {
  const json& g = section(root, "", "ground_set");
  const std::string type = text(g, "ground_set", "type", "grid");
  auto& out = cfg.ground_set;
  if (type == "grid") {
    out.kind = GroundSetKind::kGrid;
    out.grid_m = count(g, "ground_set", "m", 10);
    if (out.grid_m < 2) config_error("ground_set.m", "grid needs m >= 2");
  } else if (type == "features") {
    out.kind = GroundSetKind::kFeatures;
    const std::string p = text(g, "ground_set", "path", "");
    if (p.empty()) config_error("ground_set.path", "required for a features ground set");
    out.features_path = resolve(base, p);
    if (!std::filesystem::exists(out.features_path)) {
      config_error("ground_set.path", "file not found: " + out.features_path.string());
    }
  } else if (type == "synthetic") {
    out.kind = GroundSetKind::kSynthetic;
    auto& s = out.synthetic;
    s.kind = text(g, "ground_set", "kind", s.kind);
    if (s.kind != "jittered-layout" && s.kind != "gaussian-mixture") {
      config_error("ground_set.kind", "expected jittered-layout or gaussian-mixture");
    }
    s.items = count(g, "ground_set", "items", s.items);
    s.dim = count(g, "ground_set", "dim", s.dim);
    s.latent_dim = count(g, "ground_set", "latent_dim", s.latent_dim);
    if (s.latent_dim > s.dim) config_error("ground_set.latent_dim", "must not exceed dim");
    s.clusters = count(g, "ground_set", "clusters", s.clusters);
    s.spread = real(g, "ground_set", "spread", s.spread, false);
    if (s.spread < 0.0) config_error("ground_set.spread", "must be nonnegative");
    s.layout_seed = count(g, "ground_set", "layout_seed", s.layout_seed, false);
  } else {
    config_error("ground_set.type", "expected grid, features or synthetic, got '" + type + "'");
  }
}

void parse_model(const json& root, RunConfig& cfg) {
  const json& m = section(root, "", "model");
  const std::string mode = text(m, "model", "mode", "static");
  if (mode == "static") {
    cfg.model.mode = SurrogateMode::kStatic;
  } else if (mode == "dynamic") {
    cfg.model.mode = SurrogateMode::kDynamic;
  } else {
    config_error("model.mode", "expected static or dynamic, got '" + mode + "'");
  }
  cfg.model.hidden = counts(m, "model", "hidden", {64});
  cfg.model.use_attention = flag(m, "model", "attention", true);
  if (cfg.model.mode == SurrogateMode::kStatic && cfg.ground_set.kind == GroundSetKind::kSynthetic) {
    config_error("model.mode", "a synthetic ground set needs a dynamic model");
  }
}

void parse_dataset(const json& root, RunConfig& cfg) {
  const json& d = section(root, "", "dataset");
  cfg.dataset.paths = count(d, "dataset", "paths", cfg.dataset.paths);
  cfg.dataset.matrices = count(d, "dataset", "matrices", cfg.dataset.matrices);
  cfg.dataset.paths_per_matrix = count(d, "dataset", "paths_per_matrix", cfg.dataset.paths_per_matrix);
  cfg.dataset.k = count(d, "dataset", "k", cfg.dataset.k);
}

void parse_train(const json& root, RunConfig& cfg) {
  const json& t = section(root, "", "train");
  auto& tc = cfg.train;
  tc.learning_rate = real(t, "train", "learning_rate", tc.learning_rate);
  tc.beta1 = real(t, "train", "beta1", tc.beta1);
  tc.beta2 = real(t, "train", "beta2", tc.beta2);
  tc.epsilon = real(t, "train", "epsilon", tc.epsilon);
  if (tc.beta1 >= 1.0) config_error("train.beta1", "must be below 1");
  if (tc.beta2 >= 1.0) config_error("train.beta2", "must be below 1");
  tc.epochs = count(t, "train", "epochs", tc.epochs, false);
  tc.batch_size = count(t, "train", "batch_size", tc.batch_size);
  const std::string loss = text(t, "train", "loss", "squared-l2");
  try {
    tc.loss = parse_loss_kind(loss);
  } catch (const Error& e) {
    config_error("train.loss", e.what());
  }
  tc.seed = stream_seed(cfg, "train");
}

void parse_sample(const json& root, RunConfig& cfg) {
  const json& s = section(root, "", "sample");
  if (const json* m = member(s, "sample", "method")) cfg.sample.method = method_at(*m, "sample.method");
  cfg.sample.k = count(s, "sample", "k", cfg.sample.k);
  cfg.sample.n = count(s, "sample", "n", cfg.sample.n);
  cfg.sample.condition = counts(s, "sample", "condition", {}, true);
}

void parse_eval(const json& root, const std::filesystem::path& base, RunConfig& cfg) {
  const json& e = section(root, "", "eval");
  const json& n = section(e, "eval", "nll");
  cfg.nll.methods = methods(n, "eval.nll", "methods",
                            {Method::kUniform, Method::kKdpp, Method::kKmedoids});
  cfg.nll.k = count(n, "eval.nll", "k", cfg.nll.k);
  cfg.nll.draws = count(n, "eval.nll", "draws", cfg.nll.draws);
  cfg.nll.ground_sets = count(n, "eval.nll", "ground_sets", cfg.nll.ground_sets);

  const json& ny = section(e, "eval", "nystrom");
  auto& nc = cfg.nystrom;
  const std::string data = text(ny, "eval.nystrom", "data", "");
  if (!data.empty()) {
    nc.data_path = resolve(base, data);
    if (!std::filesystem::exists(*nc.data_path)) {
      config_error("eval.nystrom.data", "file not found: " + nc.data_path->string());
    }
  }
  nc.synthetic.items = count(ny, "eval.nystrom", "items", nc.synthetic.items);
  nc.synthetic.dim = count(ny, "eval.nystrom", "dim", nc.synthetic.dim);
  nc.synthetic.clusters = count(ny, "eval.nystrom", "clusters", nc.synthetic.clusters);
  nc.synthetic.cluster_spread = real(ny, "eval.nystrom", "cluster_spread", nc.synthetic.cluster_spread);
  nc.synthetic.noise = real(ny, "eval.nystrom", "noise", nc.synthetic.noise, false);
  nc.ridge = real(ny, "eval.nystrom", "ridge", nc.ridge);
  nc.sizes = counts(ny, "eval.nystrom", "sizes", nc.sizes);
  nc.methods = methods(ny, "eval.nystrom", "methods", nc.methods);
  nc.seeds = count(ny, "eval.nystrom", "seeds", nc.seeds);

  const json& tm = section(e, "eval", "timing");
  cfg.timing.k = count(tm, "eval.timing", "k", cfg.timing.k);
  cfg.timing.batch = count(tm, "eval.timing", "batch", cfg.timing.batch);
  cfg.timing.repeats = count(tm, "eval.timing", "repeats", cfg.timing.repeats);

  const json& th = section(e, "eval", "theorem1");
  cfg.theorem1.n = count(th, "eval.theorem1", "n", cfg.theorem1.n);
  if (cfg.theorem1.n < 2 || cfg.theorem1.n > 6) config_error("eval.theorem1.n", "expected 2..6");
  cfg.theorem1.trials = count(th, "eval.theorem1", "trials", cfg.theorem1.trials);
  cfg.theorem1.rho = real(th, "eval.theorem1", "rho", cfg.theorem1.rho);
  if (cfg.theorem1.rho >= 1.0) config_error("eval.theorem1.rho", "must be below 1");
  cfg.theorem1.adversarial_factor =
      real(th, "eval.theorem1", "adversarial_factor", cfg.theorem1.adversarial_factor);
}

FeatureMatrix synthetic_matrix(const RunConfig& cfg, std::string_view purpose, std::size_t index) {
  Rng rng(derive_seed(stream_seed(cfg, purpose), index));
  return synthetic_features(cfg.ground_set.synthetic, rng);
}

}  // namespace

std::filesystem::path RunConfig::checkpoint_path() const {
  return checkpoint.empty() ? output_dir / "checkpoint.json" : checkpoint;
}

std::uint64_t stream_seed(const RunConfig& cfg, std::string_view purpose) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : purpose) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return derive_seed(cfg.seed, h);
}

RunConfig parse_config(std::string_view input, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(input);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) config_error("<root>", "expected an object");
  const json* version = member(root, "", "config_version");
  if (!version) config_error("config_version", "missing (expected 1)");
  if (!version->is_number_integer() || version->get<long long>() != kConfigVersion) {
    config_error("config_version", "unsupported version (expected 1)");
  }
  static const std::vector<std::string> known{
      "config_version", "seed", "threads", "kernel", "ground_set", "model", "dataset",
      "train", "sample", "eval", "output_dir", "checkpoint", "description"};
  for (const auto& [key, _] : root.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) config_error(key, "unknown field");
  }

  RunConfig cfg;
  cfg.seed = count(root, "", "seed", 0, false);
  cfg.threads = count(root, "", "threads", 1);
  parse_kernel(root, cfg);
  parse_ground_set(root, base_dir, cfg);
  parse_model(root, cfg);
  parse_dataset(root, cfg);
  parse_train(root, cfg);
  parse_sample(root, cfg);
  parse_eval(root, base_dir, cfg);
  cfg.output_dir = resolve(base_dir, text(root, "", "output_dir", "out"));
  const std::string ckpt = text(root, "", "checkpoint", "");
  if (!ckpt.empty()) cfg.checkpoint = resolve(base_dir, ckpt);

  if (cfg.ground_set.kind == GroundSetKind::kGrid) {
    cfg.model.n_max = cfg.ground_set.grid_m * cfg.ground_set.grid_m;
    cfg.model.dim = 2;
  } else if (cfg.ground_set.kind == GroundSetKind::kSynthetic) {
    cfg.model.n_max = cfg.ground_set.synthetic.items;
    cfg.model.dim = cfg.ground_set.synthetic.dim;
  } else {
    const FeatureMatrix phi = load_features(cfg.ground_set.features_path);
    cfg.model.n_max = phi.items();
    cfg.model.dim = phi.dim();
  }
  if (cfg.dataset.k > cfg.model.n_max) config_error("dataset.k", "exceeds the ground-set size");
  if (cfg.sample.condition.size() > cfg.sample.k) {
    config_error("sample.condition", "has more items than sample.k");
  }
  for (std::size_t i = 0; i < cfg.sample.condition.size(); ++i) {
    if (cfg.sample.condition[i] >= cfg.model.n_max) {
      config_error("sample.condition[" + std::to_string(i) + "]", "item index out of range");
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kConfig, "cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  RunConfig cfg = parse_config(buf.str(), path.parent_path());
  cfg.source = path;
  return cfg;
}

FeatureMatrix base_ground_set(const RunConfig& cfg) {
  switch (cfg.ground_set.kind) {
    case GroundSetKind::kGrid:
      return unit_square_grid(cfg.ground_set.grid_m);
    case GroundSetKind::kFeatures:
      return load_features(cfg.ground_set.features_path);
    case GroundSetKind::kSynthetic:
      return synthetic_matrix(cfg, "sample-ground-set", 0);
  }
  fail(ErrorCode::kConfig, "unknown ground-set kind");
}

std::vector<FeatureMatrix> evaluation_ground_sets(const RunConfig& cfg, std::size_t n) {
  std::vector<FeatureMatrix> out;
  if (cfg.ground_set.kind != GroundSetKind::kSynthetic) {
    out.push_back(base_ground_set(cfg));
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) out.push_back(synthetic_matrix(cfg, "eval-ground-sets", i));
  return out;
}

PathDataset build_dataset(const RunConfig& cfg) {
  const std::uint64_t seed = stream_seed(cfg, "dataset");
  if (cfg.model.mode == SurrogateMode::kStatic) {
    FeatureMatrix phi = base_ground_set(cfg);
    const Dpp dpp(cfg.kernel.build(phi));
    return generate_static_dataset(dpp, cfg.dataset.paths, cfg.dataset.k, seed, std::move(phi),
                                   cfg.threads);
  }
  if (cfg.ground_set.kind != GroundSetKind::kSynthetic) {
    FeatureMatrix phi = base_ground_set(cfg);
    const FeatureSampler fixed = [phi](Rng&) { return phi; };
    return generate_dynamic_dataset(fixed, cfg.kernel, cfg.dataset.matrices,
                                    cfg.dataset.paths_per_matrix, cfg.dataset.k, seed, cfg.threads);
  }
  const SyntheticFeatureSpec spec = cfg.ground_set.synthetic;
  const FeatureSampler sampler = [spec](Rng& rng) { return synthetic_features(spec, rng); };
  return generate_dynamic_dataset(sampler, cfg.kernel, cfg.dataset.matrices,
                                  cfg.dataset.paths_per_matrix, cfg.dataset.k, seed, cfg.threads);
}

}  // namespace dppnet
