#include "pnp/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pnp/errors.hpp"
#include "pnp/random.hpp"

namespace pnp {

Matrix finite_diff(const ScalarFn& f, const Matrix& x, double h) {
  if (!(h > 0.0)) throw ConfigError("finite_diff step must be positive");
  Matrix probe = x;
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double orig = probe(r, c);
      probe(r, c) = orig + h;
      const double plus = f(probe);
      probe(r, c) = orig - h;
      const double minus = f(probe);
      probe(r, c) = orig;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        throw NumericalError("finite_diff: non-finite function value at (" +
                             std::to_string(r) + ", " + std::to_string(c) + ")");
      }
      out(r, c) = (plus - minus) / (2.0 * h);
    }
  }
  return out;
}

void GradCheckReport::merge(const GradCheckReport& other) {
  if (other.max_rel_err > max_rel_err || n_evaluated == 0) {
    max_rel_err = other.max_rel_err;
    worst_row = other.worst_row;
    worst_col = other.worst_col;
  }
  max_abs_err = std::max(max_abs_err, other.max_abs_err);
  n_evaluated += other.n_evaluated;
}

GradCheckReport compare_gradients(const Matrix& analytic, const Matrix& numeric) {
  if (analytic.rows() != numeric.rows() || analytic.cols() != numeric.cols()) {
    throw ConfigError("compare_gradients: shape mismatch");
  }
  GradCheckReport report;
  for (std::size_t r = 0; r < analytic.rows(); ++r) {
    for (std::size_t c = 0; c < analytic.cols(); ++c) {
      const double a = analytic(r, c);
      const double b = numeric(r, c);
      if (!std::isfinite(a) || !std::isfinite(b)) {
        throw NumericalError("non-finite gradient at (" + std::to_string(r) +
                             ", " + std::to_string(c) + ")");
      }
      const double abs_err = std::abs(a - b);
      const double rel_err =
          abs_err / std::max({std::abs(a), std::abs(b), 1e-8});
      report.max_abs_err = std::max(report.max_abs_err, abs_err);
      if (rel_err > report.max_rel_err) {
        report.max_rel_err = rel_err;
        report.worst_row = r;
        report.worst_col = c;
      }
      ++report.n_evaluated;
    }
  }
  return report;
}

GradCheckPolicy policy_for_tau(double tau) {
  if (tau >= 0.05) return {1e-5, 1e-4};
  return {1e-7, 1e-3};
}

EmbeddingBatch random_batch(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix raw(n, d);
  for (double& v : raw.flat()) v = rng.normal();
  const std::size_t classes = std::max<std::size_t>(2, n / 4);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % classes);
  return EmbeddingBatch(normalize_rows(raw), std::move(labels));
}

GradCheckReport check_loss_gradients(const LossSpec& spec,
                                     const GradCheckOptions& options) {
  if (options.n < 4 || options.d < 2) {
    throw ConfigError("check_loss_gradients needs n >= 4 and d >= 2");
  }
  const GradCheckPolicy policy = policy_for_tau(spec.tau());
  const double step = options.step > 0.0 ? options.step : policy.step;

  GradCheckReport total;
  total.label = spec.name() + " tau=" + std::to_string(spec.tau());
  total.tolerance = options.tolerance > 0.0 ? options.tolerance : policy.tolerance;
  for (std::size_t t = 0; t < options.trials; ++t) {
    const std::uint64_t seed = options.seed + t;
    const EmbeddingBatch batch = random_batch(options.n, options.d, seed);
    const auto& labels = batch.labels();
    Matrix analytic = batch_loss(batch.embeddings(), labels, spec).grad;
    for (double& v : analytic.flat()) v += options.corrupt_gradient;
    const Matrix numeric = finite_diff(
        [&](const Matrix& x) { return batch_loss(x, labels, spec).loss; },
        batch.embeddings(), step);
    try {
      total.merge(compare_gradients(analytic, numeric));
    } catch (const NumericalError& e) {
      throw NumericalError(total.label + " seed " + std::to_string(seed) + ": " +
                           e.what());
    }
  }
  return total;
}

}  // namespace pnp
