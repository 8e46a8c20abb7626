#include "pnp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "pnp/errors.hpp"
#include "pnp/random.hpp"

namespace pnp {

namespace {

void require_no_singletons(std::span<const int> labels) {
  std::map<int, std::size_t> counts;
  for (int l : labels) ++counts[l];
  std::string offending;
  for (const auto& [label, count] : counts) {
    if (count < 2) {
      offending += (offending.empty() ? "" : ", ") + std::to_string(label);
    }
  }
  if (!offending.empty()) {
    throw ConfigError("classes with a single member: " + offending);
  }
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double entropy(const std::map<int, std::size_t>& counts, double n) {
  std::vector<double> terms;
  for (const auto& [_, c] : counts) {
    const double p = static_cast<double>(c) / n;
    terms.push_back(-p * std::log(p));
  }
  std::sort(terms.begin(), terms.end());
  double h = 0.0;
  for (double t : terms) h += t;
  return h;
}

}  // namespace

std::map<int, double> recall_at_k(const EmbeddingBatch& batch,
                                  std::span<const int> ks) {
  const std::size_t n = batch.size();
  const auto& labels = batch.labels();
  require_no_singletons(labels);
  for (int k : ks) {
    if (k < 1 || static_cast<std::size_t>(k) > n - 1) {
      throw ConfigError("recall k=" + std::to_string(k) + " outside [1, " +
                        std::to_string(n - 1) + "]");
    }
  }
  const Matrix sims = pairwise_cosine(batch);

  // Position (1-based) of the first same-label row in each query's ranking.
  std::vector<std::size_t> first_hit(n);
  for (std::size_t q = 0; q < n; ++q) {
    std::size_t best = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == q || labels[j] != labels[q]) continue;
      if (best == n || sims(q, j) > sims(q, best)) best = j;
    }
    std::size_t ahead = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == q || j == best) continue;
      if (sims(q, j) > sims(q, best) || (sims(q, j) == sims(q, best) && j < best)) {
        ++ahead;
      }
    }
    first_hit[q] = ahead + 1;
  }

  std::map<int, double> out;
  for (int k : ks) {
    const auto hits = std::count_if(first_hit.begin(), first_hit.end(),
                                    [k](std::size_t pos) {
                                      return pos <= static_cast<std::size_t>(k);
                                    });
    out[k] = static_cast<double>(hits) / static_cast<double>(n);
  }
  return out;
}

ClassDistances dists(const EmbeddingBatch& batch) {
  const auto& labels = batch.labels();
  require_no_singletons(labels);
  if (std::set<int>(labels.begin(), labels.end()).size() < 2) {
    throw ConfigError("dists needs at least 2 classes");
  }
  const Matrix sims = pairwise_cosine(batch);
  double intra = 0.0, inter = 0.0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t j = i + 1; j < batch.size(); ++j) {
      const double d = 1.0 - sims(i, j);
      if (labels[i] == labels[j]) {
        intra += d;
        ++n_intra;
      } else {
        inter += d;
        ++n_inter;
      }
    }
  }
  return {intra / static_cast<double>(n_intra),
          inter / static_cast<double>(n_inter)};
}

KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed,
                    std::size_t max_iters) {
  const std::size_t n = points.rows();
  const std::size_t d = points.cols();
  if (k <= 0) throw ConfigError("kmeans: k must be positive");
  if (static_cast<std::size_t>(k) > n) {
    throw ConfigError("kmeans: k=" + std::to_string(k) + " exceeds " +
                      std::to_string(n) + " points");
  }
  const std::size_t kk = static_cast<std::size_t>(k);
  Rng rng(seed);

  // k-means++ seeding.
  KMeansResult res;
  res.centroids = Matrix(kk, d);
  std::vector<double> closest(n, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.below(n);
  for (std::size_t c = 0; c < kk; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (double v : closest) total += v;
      if (total > 0.0) {
        const double target = rng.uniform() * total;
        double acc = 0.0;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          acc += closest[i];
          if (acc > target && closest[i] > 0.0) {
            pick = i;
            break;
          }
        }
      } else {
        pick = rng.below(n);
      }
    }
    const auto src = points.row(pick);
    std::copy(src.begin(), src.end(), res.centroids.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) {
      closest[i] = std::min(closest[i], squared_distance(points.row(i), src));
    }
  }

  res.assignment.assign(n, -1);
  auto assign_all = [&]() {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = squared_distance(points.row(i), res.centroids.row(0));
      for (std::size_t c = 1; c < kk; ++c) {
        const double dist = squared_distance(points.row(i), res.centroids.row(c));
        if (dist < best_d) {
          best_d = dist;
          best = static_cast<int>(c);
        }
      }
      if (res.assignment[i] != best) {
        res.assignment[i] = best;
        changed = true;
      }
    }
    return changed;
  };

  assign_all();
  for (res.iterations = 0; res.iterations < max_iters; ++res.iterations) {
    // Reseed empty clusters onto the worst-fit point, one at a time.
    std::vector<std::size_t> sizes(kk, 0);
    for (int a : res.assignment) ++sizes[static_cast<std::size_t>(a)];
    for (std::size_t c = 0; c < kk; ++c) {
      if (sizes[c] != 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t own = static_cast<std::size_t>(res.assignment[i]);
        if (sizes[own] < 2) continue;
        const double dist = squared_distance(points.row(i), res.centroids.row(own));
        if (dist > far_d) {
          far_d = dist;
          far = i;
        }
      }
      if (far_d < 0.0) break;
      --sizes[static_cast<std::size_t>(res.assignment[far])];
      res.assignment[far] = static_cast<int>(c);
      sizes[c] = 1;
      const auto src = points.row(far);
      std::copy(src.begin(), src.end(), res.centroids.row(c).begin());
    }

    // Update step.
    Matrix sums(kk, d);
    for (std::size_t i = 0; i < n; ++i) {
      auto dst = sums.row(static_cast<std::size_t>(res.assignment[i]));
      const auto src = points.row(i);
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
    for (std::size_t c = 0; c < kk; ++c) {
      if (sizes[c] == 0) continue;
      auto dst = res.centroids.row(c);
      const auto src = sums.row(c);
      for (std::size_t j = 0; j < d; ++j) {
        dst[j] = src[j] / static_cast<double>(sizes[c]);
      }
    }

    if (!assign_all()) break;
  }

  res.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    res.inertia += squared_distance(
        points.row(i), res.centroids.row(static_cast<std::size_t>(res.assignment[i])));
  }
  return res;
}

double nmi(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ConfigError("nmi: partitions differ in length");
  if (a.empty()) throw ConfigError("nmi: empty input");
  const double n = static_cast<double>(a.size());
  std::map<int, std::size_t> count_a, count_b;
  std::map<std::pair<int, int>, std::size_t> joint;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++count_a[a[i]];
    ++count_b[b[i]];
    ++joint[{a[i], b[i]}];
  }
  const double ha = entropy(count_a, n);
  const double hb = entropy(count_b, n);
  if (count_a.size() == 1 && count_b.size() == 1) return 1.0;
  if (count_a.size() == 1 || count_b.size() == 1) return 0.0;

  // Terms are summed in sorted order so nmi(a, b) == nmi(b, a) exactly.
  std::vector<double> terms;
  terms.reserve(joint.size());
  for (const auto& [key, c] : joint) {
    const double pxy = static_cast<double>(c) / n;
    const double px = static_cast<double>(count_a[key.first]) / n;
    const double py = static_cast<double>(count_b[key.second]) / n;
    terms.push_back(pxy * std::log(pxy / (px * py)));
  }
  std::sort(terms.begin(), terms.end());
  double mi = 0.0;
  for (double t : terms) mi += t;
  return std::clamp(mi / std::sqrt(ha * hb), 0.0, 1.0);
}

RetrievalReport evaluate_retrieval(const EmbeddingBatch& batch,
                                   const EvalOptions& options) {
  RetrievalReport report;
  report.recall_at = recall_at_k(batch, options.ks);
  const ClassDistances d = dists(batch);
  report.dists_intra = d.intra;
  report.dists_inter = d.inter;
  const auto& labels = batch.labels();
  const int n_classes =
      static_cast<int>(std::set<int>(labels.begin(), labels.end()).size());
  const KMeansResult km = kmeans(batch.embeddings(), n_classes,
                                 options.kmeans_seed, options.kmeans_iters);
  report.nmi = nmi(km.assignment, labels);
  return report;
}

nlohmann::ordered_json report_to_json(const RetrievalReport& report) {
  nlohmann::ordered_json recall = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.recall_at) recall[std::to_string(k)] = v;
  nlohmann::ordered_json out;
  out["recall"] = recall;
  out["dists_intra"] = report.dists_intra;
  out["dists_inter"] = report.dists_inter;
  out["nmi"] = report.nmi;
  return out;
}

}  // namespace pnp
