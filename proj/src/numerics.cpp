#include "pnp/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pnp/errors.hpp"

namespace pnp {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ConfigError("matrix data size " + std::to_string(data_.size()) +
                      " does not match shape " + std::to_string(rows) + "x" +
                      std::to_string(cols));
  }
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double x) { return std::isfinite(x); });
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ConfigError("cosine_sim: dimension mismatch (" +
                      std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()) + ")");
  }
  return dot(a, b);
}

Vector normalize(std::span<const double> z) {
  double norm = l2_norm(z);
  if (std::isinf(norm)) {
    // Squares overflowed; rescale by the largest magnitude first.
    double big = 0.0;
    for (double x : z) big = std::max(big, std::abs(x));
    if (std::isfinite(big)) {
      double s = 0.0;
      for (double x : z) s += (x / big) * (x / big);
      norm = big * std::sqrt(s);
    }
  }
  if (!std::isfinite(norm)) throw NumericalError("normalize: non-finite vector");
  if (!(norm > kNormEpsilon)) {
    throw DegenerateInputError("normalize: vector norm " + std::to_string(norm) +
                               " is below the degenerate threshold");
  }
  Vector v(z.begin(), z.end());
  for (double& x : v) x /= norm;
  return v;
}

Vector normalize_backward(std::span<const double> z,
                          std::span<const double> upstream) {
  if (z.size() != upstream.size()) {
    throw ConfigError("normalize_backward: dimension mismatch");
  }
  const double norm = l2_norm(z);
  if (!(norm > kNormEpsilon)) {
    throw DegenerateInputError("normalize_backward: degenerate input norm");
  }
  double radial = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) radial += z[i] * upstream[i];
  radial /= norm;  // v . g
  Vector out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = (upstream[i] - (z[i] / norm) * radial) / norm;
  }
  return out;
}

Matrix normalize_rows(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (std::size_t r = 0; r < z.rows(); ++r) {
    const Vector v = normalize(z.row(r));
    std::copy(v.begin(), v.end(), out.row(r).begin());
  }
  return out;
}

Matrix normalize_rows_backward(const Matrix& z, const Matrix& upstream) {
  if (z.rows() != upstream.rows() || z.cols() != upstream.cols()) {
    throw ConfigError("normalize_rows_backward: shape mismatch");
  }
  Matrix out(z.rows(), z.cols());
  for (std::size_t r = 0; r < z.rows(); ++r) {
    const Vector g = normalize_backward(z.row(r), upstream.row(r));
    std::copy(g.begin(), g.end(), out.row(r).begin());
  }
  return out;
}

EmbeddingBatch::EmbeddingBatch(Matrix embeddings, std::vector<int> labels)
    : embeddings_(std::move(embeddings)), labels_(std::move(labels)) {
  if (embeddings_.rows() < 2) {
    throw ConfigError("embedding batch needs at least 2 rows");
  }
  if (labels_.size() != embeddings_.rows()) {
    throw ConfigError("embedding batch has " +
                      std::to_string(embeddings_.rows()) + " rows but " +
                      std::to_string(labels_.size()) + " labels");
  }
  for (std::size_t r = 0; r < embeddings_.rows(); ++r) {
    const double norm = l2_norm(embeddings_.row(r));
    if (!(std::abs(norm - 1.0) <= kUnitNormTolerance)) {
      throw ConfigError("embedding row " + std::to_string(r) +
                        " is not unit norm (norm " + std::to_string(norm) + ")");
    }
  }
}

Matrix gram(const Matrix& x) {
  const std::size_t n = x.rows();
  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = dot(x.row(i), x.row(j));
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  return s;
}

Matrix pairwise_cosine(const EmbeddingBatch& batch) {
  Matrix s = gram(batch.embeddings());
  // Rounding can push |s| a few ulps past 1.
  for (double& v : s.flat()) v = std::clamp(v, -1.0, 1.0);
  return s;
}

Matrix permute_rows(const Matrix& m, std::span<const std::size_t> order) {
  Matrix out(order.size(), m.cols());
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto src = m.row(order[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

}  // namespace pnp
