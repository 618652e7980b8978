#include "dppnet/synthetic.hpp"

#include <cmath>

#include "dppnet/error.hpp"

namespace dppnet {

namespace {

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n01(rng);
  return m;
}

Matrix layout(const SyntheticFeatureSpec& spec) {
  Rng rng(spec.layout_seed);
  const auto n = static_cast<Eigen::Index>(spec.items);
  const auto d = static_cast<Eigen::Index>(spec.dim);
  const auto r = static_cast<Eigen::Index>(std::min(spec.latent_dim, spec.dim));
  Matrix latent(n, r);
  for (Eigen::Index i = 0; i < latent.size(); ++i) latent.data()[i] = uniform01(rng);
  // orthonormal columns spanning an r-dimensional subspace of R^d
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(gaussian(d, d, rng)).householderQ();
  return latent * q.leftCols(r).transpose();
}

}  // namespace

FeatureMatrix synthetic_features(const SyntheticFeatureSpec& spec, Rng& rng) {
  if (spec.items == 0 || spec.dim == 0) {
    fail(ErrorCode::kConfig, "synthetic features need positive items and dim");
  }
  const auto n = static_cast<Eigen::Index>(spec.items);
  const auto d = static_cast<Eigen::Index>(spec.dim);
  if (spec.kind == "jittered-layout") {
    if (spec.latent_dim == 0) fail(ErrorCode::kConfig, "latent_dim must be positive");
    return FeatureMatrix(layout(spec) + spec.spread * gaussian(n, d, rng));
  }
  if (spec.kind == "gaussian-mixture") {
    if (spec.clusters == 0) fail(ErrorCode::kConfig, "clusters must be positive");
    const Matrix centers = gaussian(static_cast<Eigen::Index>(spec.clusters), d, rng);
    std::uniform_int_distribution<std::size_t> pick(0, spec.clusters - 1);
    Matrix out = spec.spread * gaussian(n, d, rng);
    for (Eigen::Index i = 0; i < n; ++i) out.row(i) += centers.row(pick(rng));
    return FeatureMatrix(std::move(out));
  }
  fail(ErrorCode::kConfig, "unknown synthetic feature kind '" + spec.kind + "'");
}

RegressionData synthetic_regression(const SyntheticRegressionSpec& spec, Rng& rng) {
  if (spec.items < 5 || spec.dim == 0 || spec.clusters == 0) {
    fail(ErrorCode::kConfig, "synthetic regression needs >= 5 items, positive dim and clusters");
  }
  const auto n = static_cast<Eigen::Index>(spec.items);
  const auto d = static_cast<Eigen::Index>(spec.dim);
  const Matrix centers = gaussian(static_cast<Eigen::Index>(spec.clusters), d, rng);
  const Matrix dir = gaussian(2, d, rng) / std::sqrt(static_cast<double>(d));
  std::uniform_int_distribution<std::size_t> pick(0, spec.clusters - 1);
  std::normal_distribution<double> noise(0.0, spec.noise);

  Matrix x = spec.cluster_spread * gaussian(n, d, rng);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.row(i) += centers.row(pick(rng));
    const double u = x.row(i).dot(dir.row(0));
    const double v = x.row(i).dot(dir.row(1));
    y(i) = std::sin(2.0 * u) + 0.5 * std::cos(3.0 * v) + noise(rng);
  }
  return RegressionData{FeatureMatrix(std::move(x)), std::move(y)};
}

RegressionData load_regression_csv(const std::filesystem::path& path) {
  const FeatureMatrix raw = load_features(path);
  if (raw.dim() < 2) fail(ErrorCode::kFormat, "regression CSV needs at least one input column and a target");
  const auto d = static_cast<Eigen::Index>(raw.dim() - 1);
  Matrix x = raw.data().leftCols(d);
  Vector y = raw.data().col(d);
  return RegressionData{FeatureMatrix(std::move(x)), std::move(y)};
}

}  // namespace dppnet
