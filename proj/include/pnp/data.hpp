#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pnp/numerics.hpp"

namespace pnp {

enum class Split { kTrain, kTest };

std::string to_string(Split split);

struct LabeledDataset {
  Matrix points;
  std::vector<int> labels;
  Split split = Split::kTrain;

  std::size_t size() const { return labels.size(); }

  // Sorted distinct labels.
  std::vector<int> classes() const;
  // Row indices grouped by class, in the order of classes().
  std::vector<std::vector<std::size_t>> indices_by_class() const;

  // Throws ConfigError unless every class has >= 2 samples and the labels
  // form a contiguous integer range.
  void validate() const;
};

struct ToyConfig {
  std::size_t n_per_class = 150;
  std::size_t n_classes = 4;  // per split
  double ring_radius = 1.0;
  double sigma_fraction = 0.1;  // blob sigma = sigma_fraction * ring_radius
};

struct ToySplits {
  LabeledDataset train;
  LabeledDataset test;
};

// 2D Gaussian blobs whose centers sit on a ring. Train and test classes
// alternate around the ring, so every test class lies between two train
// classes and is never seen in training. Train labels are 0..C-1, test labels
// C..2C-1.
ToySplits make_toy_2d(const ToyConfig& config, std::uint64_t seed);

// Center of ring slot `slot` (train classes use even slots, test odd).
std::vector<double> toy_center(const ToyConfig& config, std::size_t slot);

struct BatchPlan {
  std::size_t k_classes = 4;
  std::size_t per_class = 4;
  std::uint64_t seed = 0;
};

// Draws class-balanced batches: k distinct classes, then per_class distinct
// rows of each. Draw t depends only on (seed, t).
class BatchSampler {
 public:
  BatchSampler(const LabeledDataset& dataset, BatchPlan plan);

  std::vector<std::size_t> sample(std::uint64_t draw_index) const;
  std::vector<std::size_t> next() { return sample(counter_++); }

  std::uint64_t draws() const { return counter_; }

 private:
  std::vector<std::vector<std::size_t>> by_class_;
  std::vector<int> class_ids_;
  BatchPlan plan_;
  std::uint64_t counter_ = 0;
};

inline std::vector<std::size_t> sample_batch(const LabeledDataset& dataset,
                                             const BatchPlan& plan,
                                             std::uint64_t draw_index) {
  return BatchSampler(dataset, plan).sample(draw_index);
}

// Shuffles the classes with `seed` and maps each consecutive group of
// `group_size` to one new label. A final partial group becomes its own class.
LabeledDataset merge_classes(const LabeledDataset& dataset,
                             std::size_t group_size, std::uint64_t seed);

// Rows of `rows`, with labels, as a new dataset.
LabeledDataset subset(const LabeledDataset& dataset,
                      const std::vector<std::size_t>& rows);

// CSV with header "label,x0,...,x{d-1}", '\n' line endings, doubles in
// shortest round-trip form.
void save_embeddings_csv(const LabeledDataset& dataset,
                         const std::filesystem::path& path);
std::string embeddings_csv(const LabeledDataset& dataset);

// Throws ParseError (with line number) on a missing or malformed header,
// ragged rows, non-numeric fields or no data rows.
LabeledDataset load_embeddings_csv(const std::filesystem::path& path,
                                   Split split = Split::kTest);
LabeledDataset parse_embeddings_csv(const std::string& text,
                                    Split split = Split::kTest);

}  // namespace pnp
