#pragma once

#include <cstddef>
#include <vector>

namespace pnp {

struct SigmoidValue {
  double value;
  double derivative;  // d/dx
};

// G(x; tau) = 1 / (1 + exp(-x / tau)) and its derivative G(1-G)/tau.
// Evaluated in the two-branch form so large |x/tau| never overflows.
// Throws ConfigError when tau <= 0.
SigmoidValue sigmoid(double x, double tau);

struct IndexedSim {
  std::size_t index;  // row of the candidate in the batch
  double sim;         // similarity to the query
};

// Similarities of every candidate to one query, split by relevance. The query
// itself appears in neither list.
struct QueryContext {
  std::size_t query_index = 0;
  std::vector<IndexedSim> positives;  // S_P
  std::vector<IndexedSim> negatives;  // S_N
};

enum class RankSet { kNegatives, kPositives };

// A smooth rank R(i, S) and its partials with respect to every similarity it
// depends on. Invariant: d_anchor == -sum(d_candidates[j].derivative).
struct RankComputation {
  double value = 0.0;
  double d_anchor = 0.0;  // dR / ds_i
  std::vector<IndexedSim> d_candidates;  // (index, dR / ds_j)
};

// Number of candidates in `over` whose similarity is strictly above that of
// positive ctx.positives[anchor]. The anchor never ranks against itself.
int hard_rank(const QueryContext& ctx, std::size_t anchor, RankSet over);

inline int hard_rank_neg(const QueryContext& ctx, std::size_t anchor) {
  return hard_rank(ctx, anchor, RankSet::kNegatives);
}

// Sum over j in `over` (j != anchor) of G(s_j - s_i; tau), with partials.
RankComputation smooth_rank(const QueryContext& ctx, std::size_t anchor,
                            RankSet over, double tau);

}  // namespace pnp
