#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pnp/numerics.hpp"

namespace pnp {

// Each row queries all others. A query succeeds at k if any of its k most
// similar rows (ties broken by lower index) shares its label. Throws
// ConfigError for singleton classes or k outside [1, n-1].
std::map<int, double> recall_at_k(const EmbeddingBatch& batch,
                                  std::span<const int> ks);

struct ClassDistances {
  double intra;  // mean (1 - cos) over same-class pairs
  double inter;  // mean (1 - cos) over cross-class pairs
};

ClassDistances dists(const EmbeddingBatch& batch);

struct KMeansResult {
  std::vector<int> assignment;
  Matrix centroids;
  double inertia = 0.0;
  std::size_t iterations = 0;
};

// Lloyd's algorithm with k-means++ seeding on Euclidean rows. An emptied
// cluster is moved onto the point farthest from its current centroid.
KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed,
                    std::size_t max_iters = 300);

// I(A;B) / sqrt(H(A) H(B)) in nats. 1 when both partitions are a single
// cluster, 0 when exactly one of them is.
double nmi(std::span<const int> a, std::span<const int> b);

struct RetrievalReport {
  std::map<int, double> recall_at;
  double dists_intra = 0.0;
  double dists_inter = 0.0;
  double nmi = 0.0;
};

struct EvalOptions {
  std::vector<int> ks = {1, 2, 4, 8};
  std::uint64_t kmeans_seed = 0;
  std::size_t kmeans_iters = 300;
};

// k for k-means is the number of distinct labels.
RetrievalReport evaluate_retrieval(const EmbeddingBatch& batch,
                                   const EvalOptions& options);

// Keys in order: recall, dists_intra, dists_inter, nmi. Recall is an object
// keyed by k as a decimal string.
nlohmann::ordered_json report_to_json(const RetrievalReport& report);

}  // namespace pnp
