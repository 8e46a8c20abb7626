#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "pnp/config.hpp"
#include "pnp/data.hpp"
#include "pnp/gradcheck.hpp"
#include "pnp/losses.hpp"
#include "pnp/metrics.hpp"
#include "pnp/model.hpp"

namespace pnp {

struct TrainOutcome {
  MlpModel model;
  std::vector<double> epoch_loss;  // mean batch loss per block of steps
  std::vector<double> step_loss;
  RetrievalReport train_report;
  RetrievalReport test_report;
  LabeledDataset train_embeddings;
  LabeledDataset test_embeddings;
};

// Trains the toy MLP on `train` with the configured loss and evaluates both
// splits. Throws NumericalError (with step number and config echo) if the
// loss or parameters become non-finite.
TrainOutcome train_and_evaluate(const ExperimentConfig& config,
                                const LabeledDataset& train,
                                const LabeledDataset& test);

ToySplits toy_data_for(const ExperimentConfig& config);

// Result payload of one training run. `wall_clock_seconds` is the only
// non-deterministic member.
nlohmann::ordered_json run_record(const ExperimentConfig& config,
                                  const TrainOutcome& outcome,
                                  double wall_clock_seconds);

// train-toy: writes run.json, train_embeddings.csv, test_embeddings.csv and
// model.bin under config.out_dir. Returns the record.
nlohmann::ordered_json cmd_train_toy(const ExperimentConfig& config);

struct CurveOptions {
  std::vector<std::string> variants = {"pnp-o",  "pnp-iu",   "pnp-ib:1",
                                       "pnp-ds", "pnp-dq:2"};
  double r_max = 10.0;
  std::size_t points = 101;
  std::vector<double> ap_r_pos = {0, 1, 2, 3};
};

// CSV "variant,r_pos,r_neg,loss,dloss_drneg". PNP rows carry r_pos 0; one
// block of smooth-ap rows per entry of ap_r_pos.
std::string curves_csv(const CurveOptions& options);
std::string cmd_curves(const CurveOptions& options,
                       const std::filesystem::path& out_dir);

enum class SweepAxis { kAlpha, kB, kPerClass };
SweepAxis parse_sweep_axis(const std::string& text);
std::string to_string(SweepAxis axis);

// One run per value; writes sweep_<axis>.csv and sweep_<axis>.json.
// The JSON reports whether test R@1 is non-decreasing in the value.
nlohmann::ordered_json cmd_sweep(SweepAxis axis, const std::vector<std::string>& values,
                                 const ExperimentConfig& base);

// Trains each robust loss on original and merged training labels and
// evaluates on the original test labels. Writes robustness.json.
nlohmann::ordered_json cmd_robustness(const ExperimentConfig& base);

struct GradCheckCommand {
  std::vector<std::string> variants = {
      "pnp-o",  "pnp-iu",   "pnp-iu-prime", "pnp-ib:1", "pnp-ib:4",
      "pnp-ds", "pnp-dq:1", "pnp-dq:2",     "pnp-dq:4", "smooth-ap"};
  double tau = 0.05;
  GradCheckOptions options;
  std::filesystem::path out_dir;  // empty: no file
};

struct GradCheckSummary {
  std::vector<GradCheckReport> reports;
  bool all_passed = true;
  nlohmann::ordered_json payload;
};

GradCheckSummary cmd_grad_check(const GradCheckCommand& command);

// Reads an embeddings CSV, normalizes rows and evaluates retrieval. Empty ks
// means the EvalOptions defaults that fit the dataset (k <= n - 1). Writes
// eval.json into out_dir when non-empty.
nlohmann::ordered_json cmd_eval(const std::filesystem::path& csv,
                                const std::vector<int>& ks,
                                const std::filesystem::path& out_dir,
                                std::uint64_t kmeans_seed = 0);

// Writes `payload` as indented JSON with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& payload);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace pnp
