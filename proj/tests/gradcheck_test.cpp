#include <cmath>
#include <limits>

#include "doctest.h"
#include "pnp/errors.hpp"
#include "pnp/gradcheck.hpp"

using namespace pnp;

namespace {

double frobenius_diff(const Matrix& a, const Matrix& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.flat()[i] - b.flat()[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("finite_diff of simple functions") {
  const Matrix x(1, 2, {1.0, 2.0});
  const Matrix g = finite_diff(
      [](const Matrix& m) { return m(0, 0) * m(0, 0) + m(0, 1) * m(0, 1); }, x, 1e-5);
  CHECK(g(0, 0) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(g(0, 1) == doctest::Approx(4.0).epsilon(1e-9));

  const Matrix c = finite_diff([](const Matrix&) { return 3.0; }, Matrix(3, 2, 0.5), 1e-5);
  for (double v : c.flat()) CHECK(v == 0.0);
}

TEST_CASE("finite_diff names the coordinate of a non-finite evaluation") {
  const Matrix x(2, 2, {0.0, 0.0, 0.0, 1.0});
  auto f = [](const Matrix& m) {
    return m(1, 1) > 1.0 ? std::numeric_limits<double>::infinity() : 0.0;
  };
  CHECK_THROWS_WITH_AS(finite_diff(f, x, 1e-3), doctest::Contains("(1, 1)"), NumericalError);
}

TEST_CASE("compare_gradients reports the worst coordinate") {
  const Matrix a(2, 2, {1.0, 2.0, 3.0, 4.0});
  const Matrix b(2, 2, {1.0, 2.0, 3.3, 4.0});
  const GradCheckReport r = compare_gradients(a, b);
  CHECK(r.worst_row == 1);
  CHECK(r.worst_col == 0);
  CHECK(r.max_abs_err == doctest::Approx(0.3));
  CHECK(r.max_rel_err == doctest::Approx(0.3 / 3.3));
  CHECK(r.n_evaluated == 4);
  const GradCheckReport zero = compare_gradients(Matrix(1, 1, 0.0), Matrix(1, 1, 1e-12));
  CHECK(zero.max_rel_err == doctest::Approx(1e-4));
  CHECK_THROWS_AS(compare_gradients(a, Matrix(1, 2)), ConfigError);
}

TEST_CASE("policy follows the temperature") {
  CHECK(policy_for_tau(0.05).step == 1e-5);
  CHECK(policy_for_tau(0.05).tolerance == 1e-4);
  CHECK(policy_for_tau(0.01).step == 1e-7);
  CHECK(policy_for_tau(0.01).tolerance == 1e-3);
}

TEST_CASE("random_batch is deterministic and valid") {
  const EmbeddingBatch a = random_batch(16, 8, 3);
  const EmbeddingBatch b = random_batch(16, 8, 3);
  CHECK(a.embeddings() == b.embeddings());
  CHECK(a.labels()[0] == a.labels()[4]);
  CHECK_FALSE(random_batch(16, 8, 4).embeddings() == a.embeddings());
}

TEST_CASE("D_q, D_s and O gradients pass on small batches") {
  GradCheckOptions opts;
  opts.n = 8;
  opts.d = 4;
  opts.trials = 3;
  for (const LossSpec& spec :
       {LossSpec::pnp_dq(2, 0.05), LossSpec::pnp_ds(0.05), LossSpec::pnp_o(0.05)}) {
    for (double h : {1e-5, 1e-6}) {
      opts.step = h;
      const GradCheckReport r = check_loss_gradients(spec, opts);
      CAPTURE(r.label);
      CHECK(r.passed());
      CHECK(r.n_evaluated == 3 * 8 * 4);
      CHECK(r.worst_row < 8);
      CHECK(r.worst_col < 4);
      CHECK(r.max_abs_err >= 0.0);
    }
  }
}

TEST_CASE("stiff temperature uses the smaller step") {
  GradCheckOptions opts;
  opts.trials = 3;
  const GradCheckReport r = check_loss_gradients(LossSpec::pnp_dq(2, 0.01), opts);
  CHECK(r.tolerance == 1e-3);
  CHECK(r.passed());
}

TEST_CASE("corrupted analytic gradient is caught") {
  GradCheckOptions opts;
  opts.trials = 2;
  opts.corrupt_gradient = 1e-2;
  CHECK_FALSE(check_loss_gradients(LossSpec::pnp_dq(2, 0.05), opts).passed());
}

TEST_CASE("duplicated embeddings give finite gradients") {
  Matrix x(6, 3, 0.0);
  for (std::size_t i = 0; i < 6; ++i) x(i, 1) = 1.0;
  const EmbeddingBatch batch(x, {0, 1, 0, 1, 0, 1});
  for (const LossSpec& spec : {LossSpec::pnp_o(), LossSpec::pnp_iu(), LossSpec::pnp_ib(4),
                               LossSpec::pnp_ds(), LossSpec::pnp_dq(2), LossSpec::smooth_ap()}) {
    const LossResult r = batch_loss(batch, spec);
    CHECK(std::isfinite(r.loss));
    CHECK(r.grad.all_finite());
  }
}

TEST_CASE("central differences converge at second order") {
  const EmbeddingBatch batch = random_batch(8, 4, 11);
  const std::vector<int> labels(batch.labels().begin(), batch.labels().end());
  const LossSpec spec = LossSpec::pnp_dq(2, 0.05);
  const ScalarFn f = [&](const Matrix& x) { return batch_loss(x, labels, spec).loss; };
  const Matrix d1 = finite_diff(f, batch.embeddings(), 4e-3);
  const Matrix d2 = finite_diff(f, batch.embeddings(), 2e-3);
  const Matrix d3 = finite_diff(f, batch.embeddings(), 1e-3);
  const double ratio = frobenius_diff(d1, d2) / frobenius_diff(d2, d3);
  CHECK(ratio >= 2.5);
  CHECK(ratio <= 6.0);
}

TEST_CASE("gradient through row normalization matches finite differences") {
  const EmbeddingBatch base = random_batch(10, 5, 2);
  const std::vector<int> labels(base.labels().begin(), base.labels().end());
  Matrix z = base.embeddings();
  for (std::size_t i = 0; i < z.rows(); ++i) {
    for (std::size_t c = 0; c < z.cols(); ++c) z(i, c) *= 0.5 + 0.1 * double(i);
  }
  const LossSpec spec = LossSpec::pnp_ds(0.05);
  const ScalarFn f = [&](const Matrix& m) {
    return batch_loss(EmbeddingBatch(normalize_rows(m), labels), spec).loss;
  };
  const LossResult r = batch_loss(EmbeddingBatch(normalize_rows(z), labels), spec);
  const Matrix analytic = normalize_rows_backward(z, r.grad);
  const GradCheckReport report = compare_gradients(analytic, finite_diff(f, z, 1e-5));
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("reports merge by keeping the worst") {
  GradCheckReport a;
  a.max_rel_err = 1e-6;
  a.n_evaluated = 4;
  GradCheckReport b;
  b.max_rel_err = 1e-3;
  b.worst_row = 2;
  b.n_evaluated = 5;
  a.merge(b);
  CHECK(a.max_rel_err == 1e-3);
  CHECK(a.worst_row == 2);
  CHECK(a.n_evaluated == 9);
}
