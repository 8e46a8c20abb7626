#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "pnp/errors.hpp"
#include "pnp/numerics.hpp"
#include "pnp/random.hpp"

using namespace pnp;

namespace {

Vector random_vector(Rng& rng, std::size_t d) {
  Vector v(d);
  for (double& x : v) x = rng.normal();
  return v;
}

Matrix random_unit_rows(Rng& rng, std::size_t n, std::size_t d) {
  Matrix m(n, d);
  for (double& x : m.flat()) x = rng.normal();
  return normalize_rows(m);
}

}  // namespace

TEST_CASE("cosine_sim of unit vectors") {
  const Vector v = normalize(Vector{0.3, -1.2, 0.5});
  Vector neg = v;
  for (double& x : neg) x = -x;
  CHECK(cosine_sim(v, v) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_sim(v, neg) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(cosine_sim(Vector{1, 0}, Vector{0, 1}) == 0.0);
  CHECK(cosine_sim(v, neg) == cosine_sim(neg, v));
  CHECK_THROWS_AS(cosine_sim(Vector{1, 0}, Vector{1, 0, 0}), ConfigError);
}

TEST_CASE("normalize scales to unit length") {
  const Vector v = normalize(Vector{3, 4});
  CHECK(v[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(v[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK_THROWS_AS(normalize(Vector{0, 0}), DegenerateInputError);
  CHECK_THROWS_AS(normalize(Vector{1e-13, 0}), DegenerateInputError);
  CHECK_NOTHROW(normalize(Vector{1e-11, 0}));
  const Vector huge = normalize(Vector{3e200, 4e200});
  CHECK(huge[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK_THROWS_AS(normalize(Vector{INFINITY, 0}), NumericalError);
}

TEST_CASE("normalize is idempotent") {
  Rng rng(7);
  for (int t = 0; t < 100; ++t) {
    const Vector z = random_vector(rng, 6);
    const Vector once = normalize(z);
    const Vector twice = normalize(once);
    for (std::size_t i = 0; i < z.size(); ++i) {
      CHECK(std::abs(once[i] - twice[i]) <= 1e-12);
    }
  }
}

TEST_CASE("normalize_backward kills the radial component") {
  Rng rng(3);
  const Vector z = random_vector(rng, 5);
  const Vector v = normalize(z);
  const Vector g = normalize_backward(z, v);
  for (double x : g) CHECK(std::abs(x) < 1e-15);
}

TEST_CASE("normalize_backward matches central differences") {
  // f(z) = normalize(z) . g, differentiated numerically per coordinate.
  Rng rng(11);
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    const Vector z = random_vector(rng, 8);
    const Vector g = random_vector(rng, 8);
    const Vector analytic = normalize_backward(z, g);
    for (std::size_t i = 0; i < z.size(); ++i) {
      Vector zp = z, zm = z;
      zp[i] += h;
      zm[i] -= h;
      const double numeric = (dot(normalize(zp), g) - dot(normalize(zm), g)) / (2 * h);
      const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-8});
      CHECK(std::abs(numeric - analytic[i]) / denom < 1e-6);
    }
  }
}

TEST_CASE("pairwise_cosine of orthogonal rows is the identity") {
  const EmbeddingBatch batch(Matrix(2, 2, {1, 0, 0, 1}), {0, 1});
  const Matrix s = pairwise_cosine(batch);
  CHECK(s == Matrix(2, 2, {1, 0, 0, 1}));
}

TEST_CASE("pairwise_cosine agrees with a per-pair loop") {
  Rng rng(5);
  const EmbeddingBatch batch(random_unit_rows(rng, 5, 3), {0, 0, 1, 1, 2});
  const Matrix s = pairwise_cosine(batch);
  double max_diff = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      double loop = 0.0;
      for (std::size_t c = 0; c < 3; ++c) {
        loop += batch.embeddings()(i, c) * batch.embeddings()(j, c);
      }
      max_diff = std::max(max_diff, std::abs(s(i, j) - loop));
      CHECK(s(i, j) == doctest::Approx(cosine_sim(batch.embeddings().row(i),
                                                  batch.embeddings().row(j)))
                           .epsilon(1e-15));
      CHECK(s(i, j) == s(j, i));
      CHECK(std::abs(s(i, j)) <= 1.0);
    }
    CHECK(s(i, i) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(max_diff < 1e-12);
}

TEST_CASE("pairwise_cosine commutes with row permutations") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = random_unit_rows(rng, 7, 4);
    std::vector<std::size_t> order(7);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }
    const Matrix s = pairwise_cosine(EmbeddingBatch(x, std::vector<int>(7, 0)));
    const Matrix sp = pairwise_cosine(
        EmbeddingBatch(permute_rows(x, order), std::vector<int>(7, 0)));
    for (std::size_t i = 0; i < 7; ++i) {
      for (std::size_t j = 0; j < 7; ++j) {
        CHECK(sp(i, j) == s(order[i], order[j]));
      }
    }
  }
}

TEST_CASE("EmbeddingBatch validates its invariants") {
  CHECK_THROWS_AS(EmbeddingBatch(Matrix(1, 2, {1, 0}), {0}), ConfigError);
  CHECK_THROWS_AS(EmbeddingBatch(Matrix(2, 2, {1, 0, 0, 1}), {0}), ConfigError);
  CHECK_THROWS_AS(EmbeddingBatch(Matrix(2, 2, {1, 0, 0, 1.01}), {0, 1}),
                  ConfigError);
  CHECK_NOTHROW(EmbeddingBatch(Matrix(2, 2, {1, 0, 0, 1 + 1e-10}), {0, 1}));
}

TEST_CASE("normalize_rows_backward applies the row-wise projection") {
  Rng rng(4);
  Matrix z(3, 4), g(3, 4);
  for (double& v : z.flat()) v = rng.normal();
  for (double& v : g.flat()) v = rng.normal();
  const Matrix out = normalize_rows_backward(z, g);
  for (std::size_t r = 0; r < 3; ++r) {
    const Vector expect = normalize_backward(z.row(r), g.row(r));
    for (std::size_t c = 0; c < 4; ++c) CHECK(out(r, c) == expect[c]);
  }
  CHECK_THROWS_AS(normalize_rows_backward(z, Matrix(2, 4)), ConfigError);
}
