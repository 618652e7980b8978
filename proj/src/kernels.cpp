#include "dppnet/kernels.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "dppnet/error.hpp"
#include "dppnet/simd.hpp"

namespace dppnet {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kFormat: return "format error";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kIo: return "io error";
    case ErrorCode::kInvalidKernel: return "invalid kernel";
    case ErrorCode::kNotPsd: return "kernel not PSD";
    case ErrorCode::kSingularMatrix: return "singular matrix";
    case ErrorCode::kInfeasibleSize: return "infeasible size";
    case ErrorCode::kImpossibleCondition: return "impossible condition";
    case ErrorCode::kSizeGuard: return "size guard";
    case ErrorCode::kDegenerateAttention: return "degenerate attention";
    case ErrorCode::kDegenerateDistribution: return "degenerate distribution";
    case ErrorCode::kShapeMismatch: return "shape mismatch";
    case ErrorCode::kCheckpoint: return "checkpoint error";
    case ErrorCode::kDivergence: return "training divergence";
    case ErrorCode::kUnsupported: return "unsupported feature";
    case ErrorCode::kConfig: return "config error";
    case ErrorCode::kMissingArtifact: return "missing artifact";
  }
  return "error";
}

FeatureMatrix::FeatureMatrix(Matrix data) : data_(std::move(data)) {
  if (data_.rows() < 1 || data_.cols() < 1) {
    fail(ErrorCode::kInvalidArgument, "feature matrix needs at least one row and one column");
  }
  if (!data_.allFinite()) fail(ErrorCode::kInvalidArgument, "feature matrix has non-finite entries");
}

KernelMatrix::KernelMatrix(Matrix data) : data_(std::move(data)) {
  if (data_.rows() != data_.cols()) fail(ErrorCode::kInvalidKernel, "kernel must be square");
  if (!data_.allFinite()) fail(ErrorCode::kInvalidKernel, "kernel has non-finite entries");
  const double asym = data_.rows() == 0 ? 0.0 : (data_ - data_.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTolerance) {
    fail(ErrorCode::kInvalidKernel,
         "kernel not symmetric (max |L - L^T| = " + std::to_string(asym) + ")");
  }
}

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

bool parse_double(std::string_view cell, double& out) {
  cell = trim(cell);
  if (cell.empty()) return false;
  if (cell.front() == '+') cell.remove_prefix(1);
  const auto* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

}  // namespace

FeatureMatrix parse_features(std::string_view text, std::string_view source, CsvOptions opts) {
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  std::size_t line_no = 0;
  bool first_content = true;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;

    const auto cells = split(line, opts.delimiter);
    std::vector<double> values(cells.size());
    std::size_t bad_col = cells.size();
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (!parse_double(cells[c], values[c])) {
        bad_col = c;
        break;
      }
    }
    if (bad_col != cells.size()) {
      if (first_content) {
        first_content = false;  // header line
        continue;
      }
      std::ostringstream msg;
      msg << source << ": non-numeric cell '" << trim(cells[bad_col]) << "' at row " << line_no
          << ", column " << bad_col + 1;
      fail(ErrorCode::kParse, msg.str());
    }
    if (!rows.empty() && values.size() != width) {
      std::ostringstream msg;
      msg << source << ": ragged row " << line_no << " has " << values.size()
          << " columns, expected " << width;
      fail(ErrorCode::kFormat, msg.str());
    }
    width = values.size();
    first_content = false;
    rows.push_back(std::move(values));
  }
  if (rows.empty()) fail(ErrorCode::kFormat, std::string(source) + ": no rows");

  Matrix data(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < width; ++c) data(r, c) = rows[r][c];
  }
  return FeatureMatrix(std::move(data));
}

FeatureMatrix load_features(const std::filesystem::path& path, CsvOptions opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open feature file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_features(buf.str(), path.string(), opts);
}

FeatureMatrix unit_square_grid(std::size_t m) {
  if (m < 2) fail(ErrorCode::kInvalidArgument, "grid needs at least 2 points per axis");
  Matrix data(static_cast<Eigen::Index>(m * m), 2);
  const double step = 1.0 / static_cast<double>(m - 1);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      data(i * m + j, 0) = static_cast<double>(i) * step;
      data(i * m + j, 1) = static_cast<double>(j) * step;
    }
  }
  return FeatureMatrix(std::move(data));
}

KernelMatrix exp_quadratic_kernel(const FeatureMatrix& phi, double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    fail(ErrorCode::kInvalidArgument, "bandwidth beta must be positive");
  }
  const std::size_t n = phi.items();
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    l(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = std::exp(-beta * simd::squared_distance(phi.row(i), phi.row(j)));
      l(i, j) = v;
      l(j, i) = v;
    }
  }
  return KernelMatrix(std::move(l));
}

KernelMatrix linear_kernel(const FeatureMatrix& phi) {
  const std::size_t n = phi.items();
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = simd::dot(phi.row(i), phi.row(j));
      l(i, j) = v;
      l(j, i) = v;
    }
  }
  return KernelMatrix(std::move(l));
}

KernelMatrix KernelRecipe::build(const FeatureMatrix& phi) const {
  return type == KernelType::kLinear ? linear_kernel(phi) : exp_quadratic_kernel(phi, beta);
}

SpectralDecomposition spectral_decompose(const KernelMatrix& kernel) {
  const std::size_t n = kernel.size();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(kernel.data());
  if (solver.info() != Eigen::Success) {
    fail(ErrorCode::kInvalidKernel, "eigendecomposition did not converge");
  }
  // Eigen returns ascending order.
  SpectralDecomposition out;
  out.eigenvalues = solver.eigenvalues().reverse();
  out.eigenvectors = solver.eigenvectors().rowwise().reverse();
  if (n == 0) return out;

  const double lmax = out.eigenvalues(0);
  const double lmin = out.eigenvalues(static_cast<Eigen::Index>(n) - 1);
  const double floor = -kPsdRelTolerance * std::max(lmax, 0.0);
  if (lmin < floor) {
    fail(ErrorCode::kNotPsd, "kernel has eigenvalue " + std::to_string(lmin) +
                                 " below clamp threshold " + std::to_string(floor));
  }
  out.eigenvalues = out.eigenvalues.cwiseMax(0.0);
  return out;
}

double log_det_psd(const Matrix& m) {
  if (m.rows() != m.cols()) fail(ErrorCode::kInvalidArgument, "log_det_psd needs a square matrix");
  if (m.rows() == 0) return 0.0;
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    fail(ErrorCode::kSingularMatrix, "Cholesky factorization failed (matrix not positive definite)");
  }
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Matrix principal_submatrix(const Matrix& m, std::span<const std::size_t> idx) {
  const auto k = static_cast<Eigen::Index>(idx.size());
  Matrix out(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) out(a, b) = m(idx[a], idx[b]);
  }
  return out;
}

}  // namespace dppnet
