#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pnp/numerics.hpp"

namespace pnp {

// Loss family. Every PNP variant penalizes only the (smoothed) number of
// negatives ranked above each positive; SmoothAp also looks at positives.
enum class LossVariant {
  kPnpO,        // R
  kPnpIu,       // (1+R) log(1+R)
  kPnpIuPrime,  // (1+R) log(1+R) - R, whose derivative is exactly log(1+R)
  kPnpIb,       // (bR - log(1+bR)) / b^2
  kPnpDs,       // log(1+R)
  kPnpDq,       // 1 - (1+R)^-alpha
  kSmoothAp,    // 1 - (1+R_P) / (1+R_P+R_N)
};

inline constexpr double kDefaultTau = 0.01;

class LossSpec {
 public:
  static LossSpec pnp_o(double tau = kDefaultTau);
  static LossSpec pnp_iu(double tau = kDefaultTau);
  static LossSpec pnp_iu_prime(double tau = kDefaultTau);
  static LossSpec pnp_ib(double b, double tau = kDefaultTau);
  static LossSpec pnp_ds(double tau = kDefaultTau);
  static LossSpec pnp_dq(double alpha, double tau = kDefaultTau);
  static LossSpec smooth_ap(double tau = kDefaultTau);

  // Parses "pnp-o", "pnp-iu", "pnp-iu-prime", "pnp-ib:<b>", "pnp-ds",
  // "pnp-dq:<alpha>", "smooth-ap". Throws ConfigError on anything else.
  static LossSpec parse(const std::string& text, double tau = kDefaultTau);

  LossVariant variant() const { return variant_; }
  double tau() const { return tau_; }
  // b for PNP-I_b, alpha for PNP-D_q, 0 otherwise.
  double param() const { return param_; }

  LossSpec with_tau(double tau) const;

  // Round-trips through parse().
  std::string name() const;

  friend bool operator==(const LossSpec&, const LossSpec&) = default;

 private:
  LossSpec(LossVariant v, double param, double tau);

  LossVariant variant_;
  double param_;
  double tau_;
};

// Loss for one positive given its (smooth) rank among negatives and, for
// SmoothAp only, among the other positives.
double per_query_loss(const LossSpec& spec, double r_neg, double r_pos = 0.0);

// dL / dR_neg of per_query_loss.
double derivative_wrt_rank(const LossSpec& spec, double r_neg,
                           double r_pos = 0.0);

// dL / dR_pos; zero for every PNP variant.
double derivative_wrt_pos_rank(const LossSpec& spec, double r_neg, double r_pos);

struct QueryLoss {
  std::size_t query;
  double loss;  // mean over the query's positives
};

struct LossResult {
  double loss = 0.0;
  Matrix grad;  // d loss / d embeddings, same shape as the input
  std::size_t queries_used = 0;
  std::vector<QueryLoss> per_query;
};

// Every row serves in turn as the query against the other n-1 rows. Queries
// without a same-label peer are skipped. The loss is the mean over queries of
// the mean over positives of per_query_loss with sigmoid-relaxed ranks.
// Throws ConfigError("no valid queries") if no row has a positive peer.
LossResult batch_loss(const EmbeddingBatch& batch, const LossSpec& spec);

// Same computation on raw rows: similarities are inner products of the rows
// as given (no unit-norm check). Used for finite-difference checking.
LossResult batch_loss(const Matrix& embeddings, std::span<const int> labels,
                      const LossSpec& spec);

// batch_loss with the exact strict indicator in place of the sigmoid.
double hard_batch_loss(const EmbeddingBatch& batch, const LossSpec& spec);
std::vector<QueryLoss> hard_query_losses(const EmbeddingBatch& batch,
                                         const LossSpec& spec);

}  // namespace pnp
