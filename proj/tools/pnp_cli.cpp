// Command-line entry point for the toy experiments, loss curves, gradient
// checks and retrieval evaluation.
//
// Exit codes: 0 success, 2 configuration / input error, 3 numerical failure.

#include <charconv>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pnp/config.hpp"
#include "pnp/errors.hpp"
#include "pnp/experiments.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

// Options shared by every subcommand that runs training.
struct RunFlags {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
  std::optional<std::string> loss;
  std::optional<double> tau;
  std::optional<std::size_t> iterations;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

void add_run_flags(CLI::App* app, RunFlags& flags) {
  app->add_option("--config", flags.config_path,
                  "INI config file, or a result JSON to rerun");
  app->add_option("--set", flags.overrides, "Override a config key (key=value)");
  app->add_option("--loss", flags.loss, "Loss, e.g. pnp-dq:2, pnp-ib:4, smooth-ap");
  app->add_option("--tau", flags.tau, "Sigmoid temperature");
  app->add_option("--iterations", flags.iterations, "Optimization steps");
  app->add_option("--seed", flags.seed, "Random seed");
  app->add_option("--out", flags.out, "Output directory");
}

// Config file first, then --set overrides, then dedicated flags.
pnp::ExperimentConfig resolve(const RunFlags& flags) {
  pnp::ExperimentConfig cfg;
  if (!flags.config_path.empty()) cfg = pnp::load_config(flags.config_path);
  for (const auto& kv : flags.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw pnp::ConfigError("--set expects key=value, got '" + kv + "'");
    }
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (flags.loss) cfg.loss = *flags.loss;
  if (flags.tau) cfg.tau = *flags.tau;
  if (flags.iterations) cfg.iterations = *flags.iterations;
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.out) cfg.out_dir = *flags.out;
  cfg.validate();
  return cfg;
}

void print_report_line(const std::string& label, const nlohmann::ordered_json& test) {
  std::cout << label << " test R@1=" << test["recall"]["1"].get<double>()
            << " dists_intra=" << test["dists_intra"].get<double>()
            << " dists_inter=" << test["dists_inter"].get<double>()
            << " nmi=" << test["nmi"].get<double>() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PNP ranking-loss experiments"};
  app.require_subcommand(1);

  RunFlags train_flags;
  auto* train = app.add_subcommand("train-toy", "Train the 2D toy network");
  add_run_flags(train, train_flags);

  pnp::CurveOptions curve_opts;
  std::string curves_out = "out";
  auto* curves = app.add_subcommand("curves", "Emit loss / derivative curves");
  curves->add_option("--variants", curve_opts.variants, "Loss variants")->delimiter(',');
  curves->add_option("--r-max", curve_opts.r_max, "Largest R on the grid");
  curves->add_option("--points", curve_opts.points, "Grid points");
  curves->add_option("--ap-r-pos", curve_opts.ap_r_pos, "R_P values for smooth-ap rows")
      ->delimiter(',');
  curves->add_option("--out", curves_out, "Output directory");

  RunFlags sweep_flags;
  std::string sweep_axis;
  std::vector<std::string> sweep_values;
  auto* sweep = app.add_subcommand("sweep", "Hyper-parameter sweep on the toy task");
  add_run_flags(sweep, sweep_flags);
  sweep->add_option("--axis", sweep_axis, "alpha | b | per_class")->required();
  sweep->add_option("--values", sweep_values, "Comma-separated values")
      ->delimiter(',')
      ->required();

  RunFlags robust_flags;
  auto* robust = app.add_subcommand("robustness", "Class-merging robustness protocol");
  add_run_flags(robust, robust_flags);

  pnp::GradCheckCommand gc;
  std::string gc_out;
  auto* grad = app.add_subcommand("grad-check", "Finite-difference gradient checks");
  grad->add_option("--variants", gc.variants, "Loss variants")->delimiter(',');
  grad->add_option("--tau", gc.tau, "Sigmoid temperature");
  grad->add_option("--n", gc.options.n, "Batch size");
  grad->add_option("--d", gc.options.d, "Embedding dimension");
  grad->add_option("--trials", gc.options.trials, "Random batches per variant");
  grad->add_option("--seed", gc.options.seed, "Seed of the first batch");
  grad->add_option("--step", gc.options.step, "Finite-difference step (0: by tau)");
  grad->add_option("--corrupt-gradient", gc.options.corrupt_gradient,
                   "Test hook: offset added to analytic gradients");
  grad->add_option("--out", gc_out, "Output directory");

  std::string eval_csv;
  std::vector<int> eval_ks;
  std::string eval_out;
  std::uint64_t eval_seed = 0;
  auto* eval = app.add_subcommand("eval", "Evaluate an embeddings CSV");
  eval->add_option("csv", eval_csv, "Embeddings CSV (label,x0,...)")->required();
  eval->add_option("--ks", eval_ks, "Recall cutoffs (default 1,2,4,8 up to n - 1)")->delimiter(',');
  eval->add_option("--seed", eval_seed, "k-means seed");
  eval->add_option("--out", eval_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) {
      const auto cfg = resolve(train_flags);
      const auto record = pnp::cmd_train_toy(cfg);
      print_report_line(cfg.loss, record["test"]);
      std::cout << "wrote " << cfg.out_dir << "/run.json\n";
    } else if (*curves) {
      pnp::cmd_curves(curve_opts, curves_out);
      std::cout << "wrote " << curves_out << "/curves.csv\n";
    } else if (*sweep) {
      const auto cfg = resolve(sweep_flags);
      const auto payload =
          pnp::cmd_sweep(pnp::parse_sweep_axis(sweep_axis), sweep_values, cfg);
      for (const auto& run : payload["runs"]) {
        print_report_line(sweep_axis + "=" + run["value"].get<std::string>(),
                          run["test"]);
      }
      std::cout << "test R@1 non-decreasing: "
                << (payload["test_r1_non_decreasing"].get<bool>() ? "yes" : "no")
                << "\n";
    } else if (*robust) {
      const auto cfg = resolve(robust_flags);
      const auto payload = pnp::cmd_robustness(cfg);
      for (const auto& r : payload["results"]) {
        std::cout << r["loss"].get<std::string>()
                  << " R@1 original=" << r["r1_original"].get<double>()
                  << " merged=" << r["r1_merged"].get<double>()
                  << " degradation=" << r["degradation"].get<double>() << "\n";
      }
    } else if (*grad) {
      gc.out_dir = gc_out;
      const auto summary = pnp::cmd_grad_check(gc);
      for (const auto& r : summary.payload["results"]) {
        std::cout << (r["passed"].get<bool>() ? "PASS " : "FAIL ")
                  << r["variant"].get<std::string>();
        if (r.contains("max_rel_err")) {
          std::cout << " max_rel_err=" << r["max_rel_err"].get<double>()
                    << " tol=" << r["tolerance"].get<double>();
        } else {
          std::cout << " " << r["error"].get<std::string>();
        }
        std::cout << "\n";
      }
      return summary.all_passed ? 0 : kExitNumerical;
    } else if (*eval) {
      const auto payload = pnp::cmd_eval(eval_csv, eval_ks, eval_out, eval_seed);
      std::cout << payload.dump(2) << "\n";
    }
  } catch (const pnp::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const pnp::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const pnp::DegenerateInputError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
