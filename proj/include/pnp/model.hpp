#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>

#include "pnp/numerics.hpp"

namespace pnp {

// Weights of the input -> hidden -> hidden -> output network. Biases are
// stored as 1 x k matrices so every tensor shares one type.
struct MlpParameters {
  Matrix w1, b1;  // hidden x in, 1 x hidden
  Matrix w2, b2;  // hidden x hidden, 1 x hidden
  Matrix w3, b3;  // out x hidden, 1 x out

  static constexpr std::size_t kTensorCount = 6;

  // Zero tensors with the same shapes.
  MlpParameters zeros_like() const;

  std::array<Matrix*, kTensorCount> tensors();
  std::array<const Matrix*, kTensorCount> tensors() const;

  bool all_finite() const;

  friend bool operator==(const MlpParameters&, const MlpParameters&) = default;
};

struct ForwardCache {
  Matrix inputs;
  Matrix z1, z2;  // hidden pre-activations
  Matrix h1, h2;  // rectified activations
  Matrix z3;      // head output before normalization
};

struct ForwardResult {
  Matrix embeddings;  // unit rows
  ForwardCache cache;
};

class MlpModel {
 public:
  // Zero-initialized network.
  MlpModel(std::size_t input_dim, std::size_t hidden, std::size_t output_dim);
  explicit MlpModel(MlpParameters params);

  // Weights and biases uniform in +-1/sqrt(fan_in).
  static MlpModel initialized(std::size_t input_dim, std::size_t hidden,
                              std::size_t output_dim, std::uint64_t seed);

  std::size_t input_dim() const { return params_.w1.cols(); }
  std::size_t hidden() const { return params_.w1.rows(); }
  std::size_t output_dim() const { return params_.w3.rows(); }

  const MlpParameters& params() const { return params_; }
  MlpParameters& params() { return params_; }

  // affine -> relu -> affine -> relu -> affine -> row normalize.
  // Throws DegenerateInputError if a head output row has norm <= 1e-12.
  ForwardResult forward(const Matrix& inputs) const;

  // Reverse-mode gradients for d(loss)/d(embeddings) = grad_embeddings.
  MlpParameters backward(const ForwardCache& cache,
                         const Matrix& grad_embeddings) const;

 private:
  MlpParameters params_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled: p -= lr * wd * p
};

struct AdamState {
  AdamConfig config;
  MlpParameters first_moment;
  MlpParameters second_moment;
  std::uint64_t step = 0;

  AdamState(AdamConfig cfg, const MlpParameters& like);
};

// Bias-corrected Adam step with decoupled weight decay, in place.
void adam_step(MlpParameters& params, const MlpParameters& grads,
               AdamState& state);

// Flat binary checkpoint: magic "PNPMLP01", u64 tensor count, then per tensor
// u64 rows, u64 cols and rows*cols little-endian IEEE-754 doubles.
void save_checkpoint(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_checkpoint(const std::filesystem::path& path);

}  // namespace pnp
