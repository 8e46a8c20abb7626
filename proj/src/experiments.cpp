#include "pnp/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

#include "pnp/errors.hpp"
#include "pnp/random.hpp"

namespace pnp {

namespace {

// Independent random streams derived from the experiment seed.
enum Stream : std::uint64_t {
  kDataStream = 1,
  kModelStream = 2,
  kSamplerStream = 3,
  kMergeStream = 4,
};

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<int> usable_ks(const std::vector<int>& ks, std::size_t n) {
  std::vector<int> out;
  for (int k : ks) {
    if (k >= 1 && static_cast<std::size_t>(k) <= n - 1) out.push_back(k);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

LabeledDataset embed(const MlpModel& model, const LabeledDataset& data) {
  LabeledDataset out;
  out.split = data.split;
  out.labels = data.labels;
  try {
    out.points = model.forward(data.points).embeddings;
  } catch (const DegenerateInputError& e) {
    throw NumericalError(std::string("evaluation: ") + e.what());
  }
  return out;
}

RetrievalReport evaluate_split(const LabeledDataset& embedded,
                               const ExperimentConfig& config) {
  const EmbeddingBatch batch(embedded.points, embedded.labels);
  EvalOptions options;
  options.ks = usable_ks(config.eval_ks, batch.size());
  options.kmeans_seed = config.seed;
  options.kmeans_iters = config.kmeans_iters;
  return evaluate_retrieval(batch, options);
}

[[noreturn]] void diverged(const std::string& what, std::size_t step,
                           const ExperimentConfig& config) {
  throw NumericalError(what + " at step " + std::to_string(step) +
                       "; config: " + config.to_json().dump());
}

}  // namespace

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("failed writing " + path.string());
}

void write_json(const std::filesystem::path& path,
                const nlohmann::ordered_json& payload) {
  write_text(path, payload.dump(2) + "\n");
}

ToySplits toy_data_for(const ExperimentConfig& config) {
  ToyConfig toy;
  toy.n_per_class = config.n_per_class;
  toy.n_classes = config.n_classes;
  toy.ring_radius = config.ring_radius;
  toy.sigma_fraction = config.sigma_fraction;
  return make_toy_2d(toy, derive_seed(config.seed, kDataStream));
}

TrainOutcome train_and_evaluate(const ExperimentConfig& config,
                                const LabeledDataset& train,
                                const LabeledDataset& test) {
  config.validate();
  train.validate();
  test.validate();
  const LossSpec spec = LossSpec::parse(config.loss, config.tau);

  MlpModel model = MlpModel::initialized(train.points.cols(), config.hidden, 2,
                                         derive_seed(config.seed, kModelStream));
  AdamConfig adam_cfg;
  adam_cfg.lr = config.lr;
  adam_cfg.beta1 = config.beta1;
  adam_cfg.beta2 = config.beta2;
  adam_cfg.eps = config.adam_eps;
  adam_cfg.weight_decay = config.weight_decay;
  AdamState adam(adam_cfg, model.params());
  BatchSampler sampler(train, {config.k_classes, config.per_class,
                               derive_seed(config.seed, kSamplerStream)});

  std::vector<double> epoch_loss;
  std::vector<double> step_loss;
  step_loss.reserve(config.iterations);
  double running = 0.0;
  std::size_t in_epoch = 0;
  for (std::size_t step = 0; step < config.iterations; ++step) {
    const LabeledDataset batch = subset(train, sampler.next());
    ForwardResult fwd;
    try {
      fwd = model.forward(batch.points);
    } catch (const DegenerateInputError&) {
      diverged("degenerate embedding", step, config);
    } catch (const NumericalError&) {
      diverged("non-finite activations", step, config);
    }
    if (!fwd.embeddings.all_finite()) diverged("non-finite embeddings", step, config);
    LossResult loss;
    try {
      loss = batch_loss(EmbeddingBatch(fwd.embeddings, batch.labels), spec);
    } catch (const NumericalError&) {
      diverged("non-finite loss", step, config);
    }
    const MlpParameters grads = model.backward(fwd.cache, loss.grad);
    adam_step(model.params(), grads, adam);
    if (!model.params().all_finite()) diverged("non-finite parameters", step, config);

    step_loss.push_back(loss.loss);
    running += loss.loss;
    ++in_epoch;
    if (in_epoch == config.steps_per_epoch || step + 1 == config.iterations) {
      epoch_loss.push_back(running / static_cast<double>(in_epoch));
      running = 0.0;
      in_epoch = 0;
    }
  }

  TrainOutcome out{model, std::move(epoch_loss), std::move(step_loss), {}, {},
                   embed(model, train), embed(model, test)};
  out.train_report = evaluate_split(out.train_embeddings, config);
  out.test_report = evaluate_split(out.test_embeddings, config);
  return out;
}

nlohmann::ordered_json run_record(const ExperimentConfig& config,
                                  const TrainOutcome& outcome,
                                  double wall_clock_seconds) {
  nlohmann::ordered_json j;
  j["config"] = config.to_json();
  j["loss"] = LossSpec::parse(config.loss, config.tau).name();
  j["train_classes"] = outcome.train_embeddings.classes().size();
  j["epoch_loss"] = outcome.epoch_loss;
  j["train"] = report_to_json(outcome.train_report);
  j["test"] = report_to_json(outcome.test_report);
  j["wall_clock_seconds"] = wall_clock_seconds;
  return j;
}

nlohmann::ordered_json cmd_train_toy(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  const ToySplits data = toy_data_for(config);
  const TrainOutcome outcome = train_and_evaluate(config, data.train, data.test);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const std::filesystem::path dir(config.out_dir);
  std::filesystem::create_directories(dir);
  const auto record = run_record(config, outcome, seconds);
  write_json(dir / "run.json", record);
  save_embeddings_csv(outcome.train_embeddings, dir / "train_embeddings.csv");
  save_embeddings_csv(outcome.test_embeddings, dir / "test_embeddings.csv");
  save_checkpoint(outcome.model, dir / "model.bin");
  return record;
}

std::string curves_csv(const CurveOptions& options) {
  if (options.points < 2) throw ConfigError("curves need at least 2 grid points");
  if (!(options.r_max > 0.0)) throw ConfigError("r_max must be positive");
  std::vector<double> grid(options.points);
  for (std::size_t i = 0; i < options.points; ++i) {
    grid[i] = options.r_max * static_cast<double>(i) /
              static_cast<double>(options.points - 1);
  }
  std::string out = "variant,r_pos,r_neg,loss,dloss_drneg\n";
  auto emit = [&](const LossSpec& spec, double r_pos) {
    for (double r : grid) {
      out += spec.name() + "," + fmt(r_pos) + "," + fmt(r) + "," +
             fmt(per_query_loss(spec, r, r_pos)) + "," +
             fmt(derivative_wrt_rank(spec, r, r_pos)) + "\n";
    }
  };
  for (const auto& name : options.variants) {
    const LossSpec spec = LossSpec::parse(name);
    if (spec.variant() == LossVariant::kSmoothAp) continue;
    emit(spec, 0.0);
  }
  for (double r_pos : options.ap_r_pos) {
    if (!(r_pos >= 0.0)) throw ConfigError("r_pos must be >= 0");
    emit(LossSpec::smooth_ap(), r_pos);
  }
  return out;
}

std::string cmd_curves(const CurveOptions& options,
                       const std::filesystem::path& out_dir) {
  const std::string csv = curves_csv(options);
  write_text(out_dir / "curves.csv", csv);
  return csv;
}

SweepAxis parse_sweep_axis(const std::string& text) {
  if (text == "alpha") return SweepAxis::kAlpha;
  if (text == "b") return SweepAxis::kB;
  if (text == "per_class") return SweepAxis::kPerClass;
  throw ConfigError("unknown sweep axis '" + text + "' (alpha|b|per_class)");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kAlpha: return "alpha";
    case SweepAxis::kB: return "b";
    case SweepAxis::kPerClass: return "per_class";
  }
  return "?";
}

nlohmann::ordered_json cmd_sweep(SweepAxis axis,
                                 const std::vector<std::string>& values,
                                 const ExperimentConfig& base) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  const std::string axis_name = to_string(axis);
  const std::filesystem::path root = std::filesystem::path(base.out_dir) /
                                     ("sweep_" + axis_name);

  // Validate every value before spending time on runs.
  std::vector<ExperimentConfig> configs;
  for (const auto& v : values) {
    ExperimentConfig c = base;
    switch (axis) {
      case SweepAxis::kAlpha: c.loss = "pnp-dq:" + v; break;
      case SweepAxis::kB: c.loss = "pnp-ib:" + v; break;
      case SweepAxis::kPerClass: c.set("per_class", v); break;
    }
    c.out_dir = (root / ("value_" + v)).string();
    c.validate();
    configs.push_back(std::move(c));
  }

  std::string csv = "value,test_r1,dists_intra,dists_inter,nmi\n";
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  std::vector<double> r1s;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto record = cmd_train_toy(configs[i]);
    const auto& test = record["test"];
    const double r1 = test["recall"].begin().value().get<double>();
    r1s.push_back(r1);
    csv += values[i] + "," + fmt(r1) + "," +
           fmt(test["dists_intra"].get<double>()) + "," +
           fmt(test["dists_inter"].get<double>()) + "," +
           fmt(test["nmi"].get<double>()) + "\n";
    nlohmann::ordered_json run;
    run["value"] = values[i];
    run["test"] = test;
    runs.push_back(run);
  }
  const bool non_decreasing = std::is_sorted(r1s.begin(), r1s.end());

  nlohmann::ordered_json payload;
  payload["config"] = base.to_json();
  payload["axis"] = axis_name;
  payload["values"] = values;
  payload["runs"] = runs;
  payload["test_r1_non_decreasing"] = non_decreasing;
  write_text(root.parent_path() / ("sweep_" + axis_name + ".csv"), csv);
  write_json(root.parent_path() / ("sweep_" + axis_name + ".json"), payload);
  return payload;
}

nlohmann::ordered_json cmd_robustness(const ExperimentConfig& base) {
  ExperimentConfig cfg = base;
  cfg.n_classes = std::max<std::size_t>(cfg.n_classes, 6);
  cfg.validate();
  const ToySplits data = toy_data_for(cfg);
  const LabeledDataset merged =
      merge_classes(data.train, cfg.merge_group, derive_seed(cfg.seed, kMergeStream));
  const std::size_t merged_classes = merged.classes().size();

  // Merged runs keep the batch size: fewer classes, more samples each.
  ExperimentConfig merged_plan = cfg;
  merged_plan.k_classes = std::min(cfg.k_classes, merged_classes);
  merged_plan.per_class =
      (cfg.k_classes * cfg.per_class) / merged_plan.k_classes;

  nlohmann::ordered_json results = nlohmann::ordered_json::array();
  for (const auto& loss : cfg.robust_losses) {
    ExperimentConfig original_cfg = cfg;
    original_cfg.loss = loss;
    ExperimentConfig merged_cfg = merged_plan;
    merged_cfg.loss = loss;
    const TrainOutcome original = train_and_evaluate(original_cfg, data.train, data.test);
    const TrainOutcome merged_run = train_and_evaluate(merged_cfg, merged, data.test);
    const double r1_original = original.test_report.recall_at.begin()->second;
    const double r1_merged = merged_run.test_report.recall_at.begin()->second;

    nlohmann::ordered_json entry;
    entry["loss"] = LossSpec::parse(loss, cfg.tau).name();
    entry["r1_original"] = r1_original;
    entry["r1_merged"] = r1_merged;
    entry["degradation"] = r1_original - r1_merged;
    entry["original_train_classes"] = data.train.classes().size();
    entry["merged_train_classes"] = merged_classes;
    entry["eval_labels"] = merged_run.test_embeddings.classes();
    entry["original_test"] = report_to_json(original.test_report);
    entry["merged_test"] = report_to_json(merged_run.test_report);
    results.push_back(entry);
  }

  nlohmann::ordered_json payload;
  payload["config"] = cfg.to_json();
  payload["merged_batch_plan"] = {{"k_classes", merged_plan.k_classes},
                                  {"per_class", merged_plan.per_class}};
  payload["results"] = results;
  write_json(std::filesystem::path(cfg.out_dir) / "robustness.json", payload);
  return payload;
}

GradCheckSummary cmd_grad_check(const GradCheckCommand& command) {
  GradCheckSummary summary;
  nlohmann::ordered_json results = nlohmann::ordered_json::array();
  for (const auto& name : command.variants) {
    const LossSpec spec = LossSpec::parse(name, command.tau);
    nlohmann::ordered_json entry;
    entry["variant"] = spec.name();
    try {
      GradCheckReport report = check_loss_gradients(spec, command.options);
      entry["max_rel_err"] = report.max_rel_err;
      entry["max_abs_err"] = report.max_abs_err;
      entry["worst_coordinate"] = {report.worst_row, report.worst_col};
      entry["n_evaluated"] = report.n_evaluated;
      entry["tolerance"] = report.tolerance;
      entry["passed"] = report.passed();
      summary.all_passed = summary.all_passed && report.passed();
      summary.reports.push_back(std::move(report));
    } catch (const NumericalError& e) {
      entry["error"] = e.what();
      entry["passed"] = false;
      summary.all_passed = false;
    }
    results.push_back(entry);
  }
  const GradCheckPolicy policy = policy_for_tau(command.tau);
  nlohmann::ordered_json& p = summary.payload;
  p["tau"] = command.tau;
  p["n"] = command.options.n;
  p["d"] = command.options.d;
  p["trials"] = command.options.trials;
  p["seed"] = command.options.seed;
  p["step"] = command.options.step > 0.0 ? command.options.step : policy.step;
  p["results"] = results;
  p["all_passed"] = summary.all_passed;
  if (!command.out_dir.empty()) write_json(command.out_dir / "grad_check.json", p);
  return summary;
}

nlohmann::ordered_json cmd_eval(const std::filesystem::path& csv,
                                const std::vector<int>& ks,
                                const std::filesystem::path& out_dir,
                                std::uint64_t kmeans_seed) {
  const LabeledDataset data = load_embeddings_csv(csv);
  Matrix unit;
  try {
    unit = normalize_rows(data.points);
  } catch (const DegenerateInputError& e) {
    throw ConfigError(std::string("eval: ") + e.what());
  }
  const EmbeddingBatch batch(std::move(unit), data.labels);
  EvalOptions options;
  if (!ks.empty()) {
    options.ks = ks;
  } else {
    std::erase_if(options.ks, [&](int k) { return std::size_t(k) >= batch.size(); });
  }
  options.kmeans_seed = kmeans_seed;
  const auto payload = report_to_json(evaluate_retrieval(batch, options));
  if (!out_dir.empty()) write_json(out_dir / "eval.json", payload);
  return payload;
}

}  // namespace pnp
