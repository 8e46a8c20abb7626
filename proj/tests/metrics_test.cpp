#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "pnp/errors.hpp"
#include "pnp/gradcheck.hpp"
#include "pnp/metrics.hpp"
#include "pnp/random.hpp"

using namespace pnp;

namespace {

// Sorts every other row by (similarity desc, index asc) and looks for a
// same-label row among the first k.
double recall_oracle(const EmbeddingBatch& b, int k) {
  const std::size_t n = b.size();
  const Matrix& x = b.embeddings();
  int hits = 0;
  for (std::size_t q = 0; q < n; ++q) {
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == q) continue;
      double s = 0;
      for (std::size_t c = 0; c < b.dim(); ++c) s += x(q, c) * x(j, c);
      order.emplace_back(std::clamp(s, -1.0, 1.0), j);
    }
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& c) {
      return a.first != c.first ? a.first > c.first : a.second < c.second;
    });
    for (int r = 0; r < k; ++r) {
      if (b.labels()[order[r].second] == b.labels()[q]) {
        ++hits;
        break;
      }
    }
  }
  return double(hits) / double(n);
}

ClassDistances dists_oracle(const EmbeddingBatch& b) {
  double intra = 0, inter = 0;
  int n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (i == j) continue;
      double s = 0;
      for (std::size_t c = 0; c < b.dim(); ++c) s += b.embeddings()(i, c) * b.embeddings()(j, c);
      if (b.labels()[i] == b.labels()[j]) {
        intra += 1 - s;
        ++n_intra;
      } else {
        inter += 1 - s;
        ++n_inter;
      }
    }
  }
  return {intra / n_intra, inter / n_inter};
}

EmbeddingBatch unit_batch(std::vector<double> flat, std::size_t d, std::vector<int> labels) {
  Matrix m(labels.size(), d, std::move(flat));
  return EmbeddingBatch(normalize_rows(m), std::move(labels));
}

}  // namespace

TEST_CASE("recall of duplicated points is perfect") {
  const EmbeddingBatch b = unit_batch({1, 0, 1, 0, 0, 1, 0, 1, -1, 0, -1, 0}, 2, {0, 0, 1, 1, 2, 2});
  const std::vector<int> ks = {1, 2};
  const auto r = recall_at_k(b, ks);
  CHECK(r.at(1) == 1.0);
  CHECK(r.at(2) == 1.0);
}

TEST_CASE("adversarial batch has zero recall at 1") {
  // Each row's nearest neighbour belongs to the other class.
  const EmbeddingBatch b = unit_batch({1, 0, 1, 0.1, -1, 0, -1, 0.1}, 2, {0, 1, 0, 1});
  const std::vector<int> ks = {1};
  CHECK(recall_at_k(b, ks).at(1) == 0.0);
}

TEST_CASE("recall matches a full-sort oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const EmbeddingBatch b = random_batch(20, 4, seed);
    const std::vector<int> ks = {1, 2, 5, 19};
    const auto r = recall_at_k(b, ks);
    for (int k : ks) CHECK(r.at(k) == recall_oracle(b, k));
    CHECK(r.at(19) == 1.0);
  }
}

TEST_CASE("recall with tied similarities prefers the lower index") {
  // Row 0 sees rows 1 (other class) and 2 (same class) at identical angles.
  const EmbeddingBatch b = unit_batch({1, 0, 0, 1, 0, -1, 0, -1}, 2, {0, 1, 0, 1});
  const std::vector<int> ks = {1};
  CHECK(recall_at_k(b, ks).at(1) == recall_oracle(b, 1));
}

TEST_CASE("recall rejects singleton classes and bad k") {
  const EmbeddingBatch b = unit_batch({1, 0, 1, 0.1, 0, 1}, 2, {0, 0, 7});
  const std::vector<int> one = {1};
  CHECK_THROWS_WITH_AS(recall_at_k(b, one), doctest::Contains("7"), ConfigError);
  const EmbeddingBatch ok = unit_batch({1, 0, 1, 0.1, 0, 1, 0.1, 1}, 2, {0, 0, 1, 1});
  const std::vector<int> zero = {0};
  const std::vector<int> big = {4};
  CHECK_THROWS_AS(recall_at_k(ok, zero), ConfigError);
  CHECK_THROWS_AS(recall_at_k(ok, big), ConfigError);
}

TEST_CASE("dists examples and oracle") {
  const EmbeddingBatch same = unit_batch({1, 0, 1, 0, 0, 1, 0, 1}, 2, {0, 0, 1, 1});
  const ClassDistances d = dists(same);
  CHECK(d.intra == 0.0);
  CHECK(d.inter == doctest::Approx(1.0).epsilon(1e-15));

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const EmbeddingBatch b = random_batch(16, 5, seed);
    const ClassDistances got = dists(b);
    const ClassDistances want = dists_oracle(b);
    CHECK(std::abs(got.intra - want.intra) < 1e-12);
    CHECK(std::abs(got.inter - want.inter) < 1e-12);
  }
  const EmbeddingBatch single = unit_batch({1, 0, 0, 1}, 2, {0, 0});
  CHECK_THROWS_AS(dists(single), ConfigError);
}

TEST_CASE("retrieval metrics are rotation invariant") {
  const EmbeddingBatch b = random_batch(12, 2, 6);
  const double c = std::cos(0.7), s = std::sin(0.7);
  Matrix rotated(12, 2);
  for (std::size_t i = 0; i < 12; ++i) {
    rotated(i, 0) = c * b.embeddings()(i, 0) - s * b.embeddings()(i, 1);
    rotated(i, 1) = s * b.embeddings()(i, 0) + c * b.embeddings()(i, 1);
  }
  const EmbeddingBatch r(rotated, std::vector<int>(b.labels().begin(), b.labels().end()));
  const std::vector<int> ks = {1, 2};
  CHECK(recall_at_k(b, ks) == recall_at_k(r, ks));
  CHECK(std::abs(dists(b).intra - dists(r).intra) < 1e-12);
  CHECK(std::abs(dists(b).inter - dists(r).inter) < 1e-12);
}

TEST_CASE("kmeans") {
  SUBCASE("k = n has zero inertia") {
    const Matrix x(4, 2, {0, 0, 1, 0, 0, 1, 5, 5});
    const KMeansResult r = kmeans(x, 4, 0);
    CHECK(r.inertia == 0.0);
    std::vector<int> a = r.assignment;
    std::sort(a.begin(), a.end());
    CHECK(a == std::vector<int>{0, 1, 2, 3});
  }
  SUBCASE("two blobs are recovered") {
    Rng rng(1);
    Matrix x(40, 2);
    std::vector<int> truth(40);
    for (std::size_t i = 0; i < 40; ++i) {
      truth[i] = i < 20 ? 0 : 1;
      x(i, 0) = (truth[i] ? 5.0 : -5.0) + 0.3 * rng.normal();
      x(i, 1) = 0.3 * rng.normal();
    }
    const KMeansResult r = kmeans(x, 2, 3);
    CHECK(nmi(r.assignment, truth) == doctest::Approx(1.0).epsilon(1e-12));
    const KMeansResult again = kmeans(x, 2, 3);
    CHECK(again.assignment == r.assignment);
    CHECK(again.centroids == r.centroids);
  }
  SUBCASE("invalid k") {
    const Matrix x(3, 2, 1.0);
    CHECK_THROWS_AS(kmeans(x, 0, 0), ConfigError);
    CHECK_THROWS_AS(kmeans(x, 4, 0), ConfigError);
  }
}

TEST_CASE("nmi fixtures") {
  const std::vector<int> a = {0, 0, 1, 1};
  const std::vector<int> b = {0, 1, 0, 1};
  const std::vector<int> relabeled = {5, 5, 2, 2};
  CHECK(nmi(a, a) == 1.0);
  CHECK(nmi(a, relabeled) == 1.0);
  CHECK(nmi(a, b) == 0.0);
  const std::vector<int> x = {0, 0, 1, 1, 2, 2, 0};
  const std::vector<int> y = {1, 0, 1, 1, 0, 2, 2};
  CHECK(nmi(x, y) == nmi(y, x));
  CHECK(nmi(x, y) > 0.0);
  CHECK(nmi(x, y) < 1.0);
  const std::vector<int> one = {3, 3, 3, 3};
  CHECK(nmi(one, one) == 1.0);
  CHECK(nmi(one, a) == 0.0);
  const std::vector<int> empty;
  CHECK_THROWS_AS(nmi(empty, empty), ConfigError);
  CHECK_THROWS_AS(nmi(a, x), ConfigError);
}

TEST_CASE("report JSON keeps its key order") {
  const EmbeddingBatch b = random_batch(16, 3, 2);
  const RetrievalReport r = evaluate_retrieval(b, {});
  const nlohmann::ordered_json j = report_to_json(r);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"recall", "dists_intra", "dists_inter", "nmi"});
  std::vector<std::string> rk;
  for (const auto& [k, v] : j["recall"].items()) rk.push_back(k);
  CHECK(rk == std::vector<std::string>{"1", "2", "4", "8"});
  CHECK(j["recall"]["1"].get<double>() == r.recall_at.at(1));
}
