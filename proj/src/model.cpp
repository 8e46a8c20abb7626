#include "pnp/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <string>

#include "pnp/errors.hpp"
#include "pnp/random.hpp"

namespace pnp {

namespace {

constexpr char kMagic[8] = {'P', 'N', 'P', 'M', 'L', 'P', '0', '1'};

// out = in * W^T + b, row-wise.
Matrix affine(const Matrix& in, const Matrix& w, const Matrix& b) {
  Matrix out(in.rows(), w.rows());
  for (std::size_t r = 0; r < in.rows(); ++r) {
    const auto x = in.row(r);
    for (std::size_t o = 0; o < w.rows(); ++o) {
      out(r, o) = dot(x, w.row(o)) + b(0, o);
    }
  }
  return out;
}

Matrix relu(const Matrix& z) {
  Matrix h = z;
  for (double& v : h.flat()) v = v > 0.0 ? v : 0.0;
  return h;
}

// Given dL/d(out) for out = in * W^T + b, accumulates dW and db and returns
// dL/d(in).
Matrix affine_backward(const Matrix& in, const Matrix& w, const Matrix& grad_out,
                       Matrix& grad_w, Matrix& grad_b) {
  Matrix grad_in(in.rows(), in.cols());
  for (std::size_t r = 0; r < in.rows(); ++r) {
    const auto x = in.row(r);
    auto gx = grad_in.row(r);
    for (std::size_t o = 0; o < w.rows(); ++o) {
      const double g = grad_out(r, o);
      if (g == 0.0) continue;
      grad_b(0, o) += g;
      auto gw = grad_w.row(o);
      const auto wo = w.row(o);
      for (std::size_t c = 0; c < x.size(); ++c) {
        gw[c] += g * x[c];
        gx[c] += g * wo[c];
      }
    }
  }
  return grad_in;
}

void relu_backward(const Matrix& z, Matrix& grad) {
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!(z.flat()[i] > 0.0)) grad.flat()[i] = 0.0;
  }
}

void fill_uniform(Matrix& m, double bound, Rng& rng) {
  for (double& v : m.flat()) v = rng.uniform(-bound, bound);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes, 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
    throw ParseError("checkpoint truncated", 0);
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

MlpParameters MlpParameters::zeros_like() const {
  return {Matrix(w1.rows(), w1.cols()), Matrix(b1.rows(), b1.cols()),
          Matrix(w2.rows(), w2.cols()), Matrix(b2.rows(), b2.cols()),
          Matrix(w3.rows(), w3.cols()), Matrix(b3.rows(), b3.cols())};
}

std::array<Matrix*, MlpParameters::kTensorCount> MlpParameters::tensors() {
  return {&w1, &b1, &w2, &b2, &w3, &b3};
}

std::array<const Matrix*, MlpParameters::kTensorCount> MlpParameters::tensors()
    const {
  return {&w1, &b1, &w2, &b2, &w3, &b3};
}

bool MlpParameters::all_finite() const {
  const auto ts = tensors();
  return std::all_of(ts.begin(), ts.end(),
                     [](const Matrix* m) { return m->all_finite(); });
}

MlpModel::MlpModel(std::size_t input_dim, std::size_t hidden,
                   std::size_t output_dim)
    : params_{Matrix(hidden, input_dim), Matrix(1, hidden),
              Matrix(hidden, hidden),    Matrix(1, hidden),
              Matrix(output_dim, hidden), Matrix(1, output_dim)} {}

MlpModel::MlpModel(MlpParameters params) : params_(std::move(params)) {
  const auto& p = params_;
  const std::size_t hidden = p.w1.rows();
  const bool ok = p.b1.rows() == 1 && p.b1.cols() == hidden &&
                  p.w2.rows() == hidden && p.w2.cols() == hidden &&
                  p.b2.rows() == 1 && p.b2.cols() == hidden &&
                  p.w3.cols() == hidden && p.b3.rows() == 1 &&
                  p.b3.cols() == p.w3.rows();
  if (!ok) throw ConfigError("inconsistent MLP parameter shapes");
}

MlpModel MlpModel::initialized(std::size_t input_dim, std::size_t hidden,
                               std::size_t output_dim, std::uint64_t seed) {
  MlpModel model(input_dim, hidden, output_dim);
  Rng rng(seed);
  auto& p = model.params_;
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double hid_bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  fill_uniform(p.w1, in_bound, rng);
  fill_uniform(p.b1, in_bound, rng);
  fill_uniform(p.w2, hid_bound, rng);
  fill_uniform(p.b2, hid_bound, rng);
  fill_uniform(p.w3, hid_bound, rng);
  fill_uniform(p.b3, hid_bound, rng);
  return model;
}

ForwardResult MlpModel::forward(const Matrix& inputs) const {
  if (inputs.cols() != input_dim()) {
    throw ConfigError("forward: expected " + std::to_string(input_dim()) +
                      " input columns, got " + std::to_string(inputs.cols()));
  }
  if (!inputs.all_finite()) throw NumericalError("forward: non-finite input");
  ForwardResult out;
  auto& c = out.cache;
  c.inputs = inputs;
  c.z1 = affine(inputs, params_.w1, params_.b1);
  c.h1 = relu(c.z1);
  c.z2 = affine(c.h1, params_.w2, params_.b2);
  c.h2 = relu(c.z2);
  c.z3 = affine(c.h2, params_.w3, params_.b3);
  if (!c.z3.all_finite()) throw NumericalError("forward: non-finite head output");
  try {
    out.embeddings = normalize_rows(c.z3);
  } catch (const DegenerateInputError&) {
    throw DegenerateInputError("forward: degenerate embedding (head output norm "
                               "below threshold)");
  }
  return out;
}

MlpParameters MlpModel::backward(const ForwardCache& cache,
                                 const Matrix& grad_embeddings) const {
  if (grad_embeddings.rows() != cache.z3.rows() ||
      grad_embeddings.cols() != cache.z3.cols()) {
    throw ConfigError("backward: gradient shape does not match forward output");
  }
  MlpParameters g = params_.zeros_like();
  const Matrix d_z3 = normalize_rows_backward(cache.z3, grad_embeddings);
  Matrix d_h2 = affine_backward(cache.h2, params_.w3, d_z3, g.w3, g.b3);
  relu_backward(cache.z2, d_h2);
  Matrix d_h1 = affine_backward(cache.h1, params_.w2, d_h2, g.w2, g.b2);
  relu_backward(cache.z1, d_h1);
  affine_backward(cache.inputs, params_.w1, d_h1, g.w1, g.b1);
  return g;
}

AdamState::AdamState(AdamConfig cfg, const MlpParameters& like)
    : config(cfg),
      first_moment(like.zeros_like()),
      second_moment(like.zeros_like()) {}

void adam_step(MlpParameters& params, const MlpParameters& grads,
               AdamState& state) {
  const AdamConfig& cfg = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);

  auto ps = params.tensors();
  const auto gs = grads.tensors();
  auto ms = state.first_moment.tensors();
  auto vs = state.second_moment.tensors();
  for (std::size_t k = 0; k < MlpParameters::kTensorCount; ++k) {
    auto p = ps[k]->flat();
    const auto g = gs[k]->flat();
    auto m = ms[k]->flat();
    auto v = vs[k]->flat();
    if (g.size() != p.size() || m.size() != p.size()) {
      throw ConfigError("adam_step: shape mismatch in tensor " + std::to_string(k));
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      p[i] -= cfg.lr * (m_hat / (std::sqrt(v_hat) + cfg.eps) +
                        cfg.weight_decay * p[i]);
    }
  }
}

void save_checkpoint(const MlpModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  const auto ts = model.params().tensors();
  write_u64(out, ts.size());
  for (const Matrix* m : ts) {
    write_u64(out, m->rows());
    write_u64(out, m->cols());
    for (double v : m->flat()) write_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw ConfigError("failed writing checkpoint " + path.string());
}

MlpModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) ||
      !std::equal(std::begin(magic), std::end(magic), std::begin(kMagic))) {
    throw ParseError("bad checkpoint magic", 0);
  }
  if (read_u64(in) != MlpParameters::kTensorCount) {
    throw ParseError("unexpected checkpoint tensor count", 0);
  }
  MlpParameters params;
  for (Matrix* m : params.tensors()) {
    const std::uint64_t rows = read_u64(in);
    const std::uint64_t cols = read_u64(in);
    if (rows > (1u << 20) || cols > (1u << 20)) {
      throw ParseError("implausible checkpoint tensor shape", 0);
    }
    std::vector<double> data(rows * cols);
    for (double& v : data) v = std::bit_cast<double>(read_u64(in));
    *m = Matrix(rows, cols, std::move(data));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ParseError("trailing bytes after checkpoint", 0);
  }
  return MlpModel(std::move(params));
}

}  // namespace pnp
