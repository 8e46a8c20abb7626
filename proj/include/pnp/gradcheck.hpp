#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "pnp/losses.hpp"
#include "pnp/numerics.hpp"

namespace pnp {

using ScalarFn = std::function<double(const Matrix&)>;

// Central differences (f(x + h e) - f(x - h e)) / 2h for every coordinate.
// Throws NumericalError naming the coordinate if f is non-finite there.
Matrix finite_diff(const ScalarFn& f, const Matrix& x, double h);

struct GradCheckReport {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::size_t worst_row = 0;
  std::size_t worst_col = 0;
  std::size_t n_evaluated = 0;
  double tolerance = 0.0;
  std::string label;

  bool passed() const { return max_rel_err < tolerance; }
  void merge(const GradCheckReport& other);
};

// Relative error per coordinate is |a - b| / max(|a|, |b|, 1e-8).
GradCheckReport compare_gradients(const Matrix& analytic, const Matrix& numeric);

// Step and tolerance used for a given temperature: (1e-5, 1e-4) when
// tau >= 0.05, (1e-7, 1e-3) for stiffer sigmoids.
struct GradCheckPolicy {
  double step;
  double tolerance;
};
GradCheckPolicy policy_for_tau(double tau);

// Random batch of n unit rows in R^d with labels i % max(2, n/4), so every
// class has a peer. Deterministic in seed.
EmbeddingBatch random_batch(std::size_t n, std::size_t d, std::uint64_t seed);

struct GradCheckOptions {
  std::size_t n = 16;
  std::size_t d = 8;
  std::size_t trials = 20;
  std::uint64_t seed = 0;
  // Zero means "use policy_for_tau".
  double step = 0.0;
  double tolerance = 0.0;
  // Test hook: added to every analytic gradient entry before comparison.
  double corrupt_gradient = 0.0;
};

// Compares batch_loss's analytic gradient to finite_diff over `trials` random
// batches. Trial t uses seed `seed + t`.
GradCheckReport check_loss_gradients(const LossSpec& spec,
                                     const GradCheckOptions& options);

}  // namespace pnp
