#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pnp {

using Vector = std::vector<double>;

// Inputs with a smaller L2 norm are rejected by normalize().
inline constexpr double kNormEpsilon = 1e-12;
// Allowed deviation from unit norm for rows of an EmbeddingBatch.
inline constexpr double kUnitNormTolerance = 1e-9;

// Dense row-major matrix of doubles. Shape is fixed at construction.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

// Dot product of two unit vectors. Throws ConfigError on dimension mismatch.
double cosine_sim(std::span<const double> a, std::span<const double> b);

// z / |z|. Throws DegenerateInputError when |z| <= kNormEpsilon.
Vector normalize(std::span<const double> z);

// Gradient of a scalar through normalize(): (I - v v^T) g / |z| with v = z/|z|.
Vector normalize_backward(std::span<const double> z,
                          std::span<const double> upstream);

// Row-wise normalize / normalize_backward.
Matrix normalize_rows(const Matrix& z);
Matrix normalize_rows_backward(const Matrix& z, const Matrix& upstream);

// n x d unit-norm embeddings with one integer label per row.
class EmbeddingBatch {
 public:
  // Validates shape, label count, n >= 2 and unit row norms.
  EmbeddingBatch(Matrix embeddings, std::vector<int> labels);

  const Matrix& embeddings() const { return embeddings_; }
  const std::vector<int>& labels() const { return labels_; }
  std::size_t size() const { return embeddings_.rows(); }
  std::size_t dim() const { return embeddings_.cols(); }

 private:
  Matrix embeddings_;
  std::vector<int> labels_;
};

// Gram matrix X X^T of the rows; on unit rows this is the cosine matrix.
Matrix gram(const Matrix& x);

// S[i][j] = cos(v_i, v_j). Symmetric with unit diagonal.
Matrix pairwise_cosine(const EmbeddingBatch& batch);

// Returns a matrix with rows in the given order.
Matrix permute_rows(const Matrix& m, std::span<const std::size_t> order);

}  // namespace pnp
