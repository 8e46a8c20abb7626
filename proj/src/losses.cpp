#include "pnp/losses.hpp"

#include <charconv>
#include <cmath>

#include "pnp/errors.hpp"
#include "pnp/smooth_rank.hpp"

namespace pnp {

namespace {

void require_rank(double r, const char* which) {
  if (!(r >= 0.0) || !std::isfinite(r)) {
    throw ConfigError(std::string("rank ") + which +
                      " must be finite and non-negative, got " +
                      std::to_string(r));
  }
}

std::string format_param(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_param(const std::string& text, const std::string& whole) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ConfigError("bad loss parameter in '" + whole + "'");
  }
  return v;
}

}  // namespace

LossSpec::LossSpec(LossVariant v, double param, double tau)
    : variant_(v), param_(param), tau_(tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw ConfigError("temperature tau must be positive, got " +
                      std::to_string(tau));
  }
  if (v == LossVariant::kPnpIb && !(param > 0.0 && std::isfinite(param))) {
    throw ConfigError("PNP-I_b requires b > 0, got " + std::to_string(param));
  }
  if (v == LossVariant::kPnpDq && !(param >= 1.0 && std::isfinite(param))) {
    throw ConfigError("PNP-D_q requires alpha >= 1, got " +
                      std::to_string(param));
  }
}

LossSpec LossSpec::pnp_o(double tau) { return {LossVariant::kPnpO, 0.0, tau}; }
LossSpec LossSpec::pnp_iu(double tau) { return {LossVariant::kPnpIu, 0.0, tau}; }
LossSpec LossSpec::pnp_iu_prime(double tau) {
  return {LossVariant::kPnpIuPrime, 0.0, tau};
}
LossSpec LossSpec::pnp_ib(double b, double tau) {
  return {LossVariant::kPnpIb, b, tau};
}
LossSpec LossSpec::pnp_ds(double tau) { return {LossVariant::kPnpDs, 0.0, tau}; }
LossSpec LossSpec::pnp_dq(double alpha, double tau) {
  return {LossVariant::kPnpDq, alpha, tau};
}
LossSpec LossSpec::smooth_ap(double tau) {
  return {LossVariant::kSmoothAp, 0.0, tau};
}

LossSpec LossSpec::with_tau(double tau) const { return {variant_, param_, tau}; }

LossSpec LossSpec::parse(const std::string& text, double tau) {
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const bool has_param = colon != std::string::npos;
  auto no_param = [&](LossVariant v) {
    if (has_param) throw ConfigError("loss '" + head + "' takes no parameter");
    return LossSpec(v, 0.0, tau);
  };
  auto with_param = [&](LossVariant v) {
    if (!has_param) {
      throw ConfigError("loss '" + head + "' needs a parameter, e.g. '" + head +
                        ":2'");
    }
    return LossSpec(v, parse_param(text.substr(colon + 1), text), tau);
  };
  if (head == "pnp-o") return no_param(LossVariant::kPnpO);
  if (head == "pnp-iu") return no_param(LossVariant::kPnpIu);
  if (head == "pnp-iu-prime") return no_param(LossVariant::kPnpIuPrime);
  if (head == "pnp-ib") return with_param(LossVariant::kPnpIb);
  if (head == "pnp-ds") return no_param(LossVariant::kPnpDs);
  if (head == "pnp-dq") return with_param(LossVariant::kPnpDq);
  if (head == "smooth-ap") return no_param(LossVariant::kSmoothAp);
  throw ConfigError("unknown loss '" + text + "'");
}

std::string LossSpec::name() const {
  switch (variant_) {
    case LossVariant::kPnpO: return "pnp-o";
    case LossVariant::kPnpIu: return "pnp-iu";
    case LossVariant::kPnpIuPrime: return "pnp-iu-prime";
    case LossVariant::kPnpIb: return "pnp-ib:" + format_param(param_);
    case LossVariant::kPnpDs: return "pnp-ds";
    case LossVariant::kPnpDq: return "pnp-dq:" + format_param(param_);
    case LossVariant::kSmoothAp: return "smooth-ap";
  }
  return "?";
}

double per_query_loss(const LossSpec& spec, double r_neg, double r_pos) {
  require_rank(r_neg, "R_neg");
  require_rank(r_pos, "R_pos");
  const double r = r_neg;
  switch (spec.variant()) {
    case LossVariant::kPnpO:
      return r;
    case LossVariant::kPnpIu:
      return (1.0 + r) * std::log1p(r);
    case LossVariant::kPnpIuPrime:
      return (1.0 + r) * std::log1p(r) - r;
    case LossVariant::kPnpIb: {
      const double b = spec.param();
      return (b * r - std::log1p(b * r)) / (b * b);
    }
    case LossVariant::kPnpDs:
      return std::log1p(r);
    case LossVariant::kPnpDq:
      return -std::expm1(-spec.param() * std::log1p(r));
    case LossVariant::kSmoothAp:
      return r / (1.0 + r_pos + r);
  }
  return 0.0;
}

double derivative_wrt_rank(const LossSpec& spec, double r_neg, double r_pos) {
  require_rank(r_neg, "R_neg");
  require_rank(r_pos, "R_pos");
  const double r = r_neg;
  switch (spec.variant()) {
    case LossVariant::kPnpO:
      return 1.0;
    case LossVariant::kPnpIu:
      return std::log1p(r) + 1.0;
    case LossVariant::kPnpIuPrime:
      return std::log1p(r);
    case LossVariant::kPnpIb:
      return r / (1.0 + spec.param() * r);
    case LossVariant::kPnpDs:
      return 1.0 / (1.0 + r);
    case LossVariant::kPnpDq: {
      const double alpha = spec.param();
      return alpha * std::pow(1.0 + r, -(alpha + 1.0));
    }
    case LossVariant::kSmoothAp: {
      const double denom = 1.0 + r_pos + r;
      return (1.0 + r_pos) / (denom * denom);
    }
  }
  return 0.0;
}

double derivative_wrt_pos_rank(const LossSpec& spec, double r_neg,
                               double r_pos) {
  require_rank(r_neg, "R_neg");
  require_rank(r_pos, "R_pos");
  if (spec.variant() != LossVariant::kSmoothAp) return 0.0;
  const double denom = 1.0 + r_pos + r_neg;
  return -r_neg / (denom * denom);
}

namespace {

enum class Relaxation { kSigmoid, kHard };

QueryContext build_context(const Matrix& sims, std::span<const int> labels,
                           std::size_t q) {
  QueryContext ctx;
  ctx.query_index = q;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (j == q) continue;
    const IndexedSim entry{j, sims(q, j)};
    if (labels[j] == labels[q]) {
      ctx.positives.push_back(entry);
    } else {
      ctx.negatives.push_back(entry);
    }
  }
  return ctx;
}

// Shared driver for the smooth and hard losses. When `sim_grad` is non-null
// it receives d loss / d S (unscaled by the query count).
LossResult evaluate(const Matrix& x, std::span<const int> labels,
                    const LossSpec& spec, Relaxation mode, Matrix* sim_grad) {
  const std::size_t n = x.rows();
  if (labels.size() != n) {
    throw ConfigError("batch has " + std::to_string(n) + " rows but " +
                      std::to_string(labels.size()) + " labels");
  }
  const Matrix sims = gram(x);
  const bool uses_pos = spec.variant() == LossVariant::kSmoothAp;

  LossResult result;
  long double total = 0.0L;
  for (std::size_t q = 0; q < n; ++q) {
    const QueryContext ctx = build_context(sims, labels, q);
    if (ctx.positives.empty()) continue;
    const double weight = 1.0 / static_cast<double>(ctx.positives.size());
    long double query_loss = 0.0L;
    for (std::size_t a = 0; a < ctx.positives.size(); ++a) {
      if (mode == Relaxation::kHard) {
        const double r_neg = hard_rank(ctx, a, RankSet::kNegatives);
        const double r_pos = uses_pos ? hard_rank(ctx, a, RankSet::kPositives) : 0.0;
        query_loss += per_query_loss(spec, r_neg, r_pos);
        continue;
      }
      const RankComputation neg = smooth_rank(ctx, a, RankSet::kNegatives, spec.tau());
      RankComputation pos;
      if (uses_pos) pos = smooth_rank(ctx, a, RankSet::kPositives, spec.tau());
      query_loss += per_query_loss(spec, neg.value, pos.value);
      if (sim_grad == nullptr) continue;

      const std::size_t anchor = ctx.positives[a].index;
      const double d_neg = weight * derivative_wrt_rank(spec, neg.value, pos.value);
      for (const IndexedSim& p : neg.d_candidates) {
        (*sim_grad)(q, p.index) += d_neg * p.sim;
      }
      (*sim_grad)(q, anchor) += d_neg * neg.d_anchor;
      if (uses_pos) {
        const double d_pos =
            weight * derivative_wrt_pos_rank(spec, neg.value, pos.value);
        for (const IndexedSim& p : pos.d_candidates) {
          (*sim_grad)(q, p.index) += d_pos * p.sim;
        }
        (*sim_grad)(q, anchor) += d_pos * pos.d_anchor;
      }
    }
    query_loss /= static_cast<long double>(ctx.positives.size());
    result.per_query.push_back({q, static_cast<double>(query_loss)});
    total += query_loss;
  }
  result.queries_used = result.per_query.size();
  if (result.queries_used == 0) {
    throw ConfigError("no valid queries: no instance has a same-label peer");
  }
  result.loss = static_cast<double>(total / static_cast<long double>(result.queries_used));
  return result;
}

}  // namespace

LossResult batch_loss(const Matrix& embeddings, std::span<const int> labels,
                      const LossSpec& spec) {
  const std::size_t n = embeddings.rows();
  Matrix sim_grad(n, n);
  LossResult result =
      evaluate(embeddings, labels, spec, Relaxation::kSigmoid, &sim_grad);
  const double scale = 1.0 / static_cast<double>(result.queries_used);

  // s_qj = x_q . x_j, so dX = (dS + dS^T) X.
  const std::size_t d = embeddings.cols();
  result.grad = Matrix(n, d);
  for (std::size_t q = 0; q < n; ++q) {
    for (std::size_t j = 0; j < n; ++j) {
      const double g = sim_grad(q, j) * scale;
      if (g == 0.0) continue;
      const auto xq = embeddings.row(q);
      const auto xj = embeddings.row(j);
      auto gq = result.grad.row(q);
      auto gj = result.grad.row(j);
      for (std::size_t c = 0; c < d; ++c) {
        gq[c] += g * xj[c];
        gj[c] += g * xq[c];
      }
    }
  }
  if (!std::isfinite(result.loss) || !result.grad.all_finite()) {
    throw NumericalError("batch_loss produced a non-finite value for " +
                         spec.name());
  }
  return result;
}

LossResult batch_loss(const EmbeddingBatch& batch, const LossSpec& spec) {
  return batch_loss(batch.embeddings(), batch.labels(), spec);
}

double hard_batch_loss(const EmbeddingBatch& batch, const LossSpec& spec) {
  return evaluate(batch.embeddings(), batch.labels(), spec, Relaxation::kHard,
                  nullptr)
      .loss;
}

std::vector<QueryLoss> hard_query_losses(const EmbeddingBatch& batch,
                                         const LossSpec& spec) {
  return evaluate(batch.embeddings(), batch.labels(), spec, Relaxation::kHard,
                  nullptr)
      .per_query;
}

}  // namespace pnp
