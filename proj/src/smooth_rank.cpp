#include "pnp/smooth_rank.hpp"

#include <cmath>
#include <string>

#include "pnp/errors.hpp"

namespace pnp {

namespace {

void require_positive_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw ConfigError("temperature tau must be positive and finite, got " +
                      std::to_string(tau));
  }
}

const std::vector<IndexedSim>& candidates(const QueryContext& ctx, RankSet over) {
  return over == RankSet::kNegatives ? ctx.negatives : ctx.positives;
}

void require_anchor(const QueryContext& ctx, std::size_t anchor) {
  if (anchor >= ctx.positives.size()) {
    throw ConfigError("rank anchor " + std::to_string(anchor) +
                      " out of range for " +
                      std::to_string(ctx.positives.size()) + " positives");
  }
}

}  // namespace

SigmoidValue sigmoid(double x, double tau) {
  require_positive_tau(tau);
  const double t = x / tau;
  double value;
  if (t >= 0.0) {
    value = 1.0 / (1.0 + std::exp(-t));
  } else {
    const double e = std::exp(t);
    value = e / (1.0 + e);
  }
  return {value, value * (1.0 - value) / tau};
}

int hard_rank(const QueryContext& ctx, std::size_t anchor, RankSet over) {
  require_anchor(ctx, anchor);
  const IndexedSim& self = ctx.positives[anchor];
  int count = 0;
  for (const IndexedSim& c : candidates(ctx, over)) {
    if (c.index == self.index) continue;
    if (c.sim - self.sim > 0.0) ++count;
  }
  return count;
}

RankComputation smooth_rank(const QueryContext& ctx, std::size_t anchor,
                            RankSet over, double tau) {
  require_positive_tau(tau);
  require_anchor(ctx, anchor);
  const IndexedSim& self = ctx.positives[anchor];
  RankComputation out;
  const auto& set = candidates(ctx, over);
  out.d_candidates.reserve(set.size());
  for (const IndexedSim& c : set) {
    if (c.index == self.index) continue;
    const SigmoidValue g = sigmoid(c.sim - self.sim, tau);
    out.value += g.value;
    out.d_anchor -= g.derivative;
    out.d_candidates.push_back({c.index, g.derivative});
  }
  return out;
}

}  // namespace pnp
