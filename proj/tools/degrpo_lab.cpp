// degrpo-lab: train and analyze GRPO / decoupled-GRPO policies on a synthetic
// hybrid-reasoning environment.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "degrpo/commands.hpp"
#include "degrpo/config.hpp"
#include "degrpo/errors.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
  std::optional<double> alpha;
  std::optional<double> gamma;
  std::optional<double> epsilon;
  std::optional<double> beta;
  std::optional<std::string> variant;
  std::string out;
};

void add_config_options(CLI::App* cmd, CommonOptions& opts,
                        bool with_objective_flags = true) {
  cmd->add_option("--config", opts.config_path,
                  "JSON config file (see README for the schema)");
  cmd->add_option("--preset", opts.preset,
                  "built-in preset: vanilla-collapse, degrpo-ucurve, "
                  "alpha-sweep");
  cmd->add_option("--seed", opts.seed, "training seed override");
  cmd->add_option("--steps", opts.steps, "outer step count override");
  if (with_objective_flags) {
    cmd->add_option("--alpha", opts.alpha, "control-token weight (DeGRPO)");
    cmd->add_option("--gamma", opts.gamma, "short-preference reward margin");
    cmd->add_option("--epsilon", opts.epsilon, "clip width");
    cmd->add_option("--beta", opts.beta, "KL coefficient");
    cmd->add_option("--variant", opts.variant,
                    "objective variant: vanilla_grpo or degrpo");
  }
  cmd->add_option("--out", opts.out, "output directory");
}

degrpo::RunConfig resolve_config(const CommonOptions& opts,
                                 const std::string& fallback_preset) {
  degrpo::RunConfig cfg;
  if (!opts.preset.empty() && !opts.config_path.empty())
    throw degrpo::ConfigError("provide either --preset or --config, not both");
  if (!opts.preset.empty()) {
    cfg = degrpo::make_preset(opts.preset);
  } else if (!opts.config_path.empty()) {
    cfg = degrpo::load_run_config(opts.config_path);
  } else if (!fallback_preset.empty()) {
    cfg = degrpo::make_preset(fallback_preset);
  } else {
    throw degrpo::ConfigError("provide --preset or --config");
  }
  if (opts.seed) cfg.train.seed = *opts.seed;
  if (opts.steps) cfg.train.steps = *opts.steps;
  if (opts.alpha) cfg.train.objective.alpha = *opts.alpha;
  if (opts.gamma) cfg.train.reward.gamma = *opts.gamma;
  if (opts.epsilon) cfg.train.objective.epsilon = *opts.epsilon;
  if (opts.beta) cfg.train.objective.beta = *opts.beta;
  if (opts.variant) cfg.train.objective.variant = degrpo::variant_from_string(*opts.variant);
  if (!opts.out.empty()) cfg.output_dir = opts.out;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic-environment simulator for group-relative policy "
               "optimization with decoupled control-token updates"};
  app.require_subcommand(1);

  CommonOptions train_opts;
  CLI::App* train = app.add_subcommand("train", "run one training job");
  add_config_options(train, train_opts);

  CommonOptions compare_opts;
  std::vector<std::uint64_t> compare_seeds{0, 1, 2, 3, 4};
  CLI::App* compare = app.add_subcommand(
      "compare", "run vanilla and decoupled arms on the same environment");
  add_config_options(compare, compare_opts);
  compare->add_option("--seeds", compare_seeds, "seeds, comma separated")
      ->delimiter(',');

  CommonOptions sweep_opts;
  std::vector<double> sweep_alphas{0.5, 0.001};
  std::vector<std::uint64_t> sweep_seeds{0, 1, 2, 3, 4};
  std::optional<double> sweep_threshold;
  CLI::App* sweep = app.add_subcommand(
      "sweep-alpha", "sweep the control-token weight alpha");
  add_config_options(sweep, sweep_opts);
  sweep->add_option("--alphas", sweep_alphas, "alpha values, comma separated")
      ->delimiter(',');
  sweep->add_option("--seeds", sweep_seeds, "seeds, comma separated")
      ->delimiter(',');
  sweep->add_option("--threshold", sweep_threshold,
                    "all-correct-short count a step must exceed "
                    "(default: 25% of batch_queries)");

  CommonOptions hist_opts;
  std::string hist_params;
  int hist_samples = 10000;
  CLI::App* hist = app.add_subcommand(
      "policy-histogram", "histogram of P(think|x) under saved parameters");
  add_config_options(hist, hist_opts, /*with_objective_flags=*/false);
  hist->add_option("--params", hist_params, "params.bin path")->required();
  hist->add_option("--samples", hist_samples, "number of sampled queries");

  std::vector<std::string> plot_inputs;
  std::string plot_out = "plot.svg";
  CLI::App* plot = app.add_subcommand("plot", "render metrics CSVs as SVG");
  plot->add_option("inputs", plot_inputs, "metrics.csv files")->required();
  plot->add_option("--out", plot_out, "output SVG path");

  std::uint64_t check_seed = 7;
  int check_coords = 64;
  double check_h = 1e-5;
  double check_tol = 1e-5;
  CLI::App* check = app.add_subcommand(
      "grad-check", "finite-difference verification of objective gradients");
  check->add_option("--seed", check_seed, "scenario seed");
  check->add_option("--coords", check_coords, "coordinates to check");
  check->add_option("--step-size", check_h, "finite-difference step");
  check->add_option("--rel-tol", check_tol, "relative error tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return degrpo::kExitConfig;
  }

  try {
    if (train->parsed())
      return degrpo::cmd_train(resolve_config(train_opts, ""));
    if (compare->parsed()) {
      const degrpo::RunConfig cfg =
          resolve_config(compare_opts, "vanilla-collapse");
      return degrpo::cmd_compare(cfg, compare_seeds, compare_opts.out);
    }
    if (sweep->parsed()) {
      const degrpo::RunConfig cfg = resolve_config(sweep_opts, "alpha-sweep");
      return degrpo::cmd_sweep_alpha(cfg, sweep_alphas, sweep_seeds,
                                     sweep_threshold, sweep_opts.out);
    }
    if (hist->parsed()) {
      const degrpo::RunConfig cfg = resolve_config(hist_opts, "degrpo-ucurve");
      return degrpo::cmd_policy_histogram(cfg, hist_params, hist_samples,
                                          hist_opts.out);
    }
    if (plot->parsed()) {
      std::vector<std::filesystem::path> paths(plot_inputs.begin(),
                                               plot_inputs.end());
      return degrpo::cmd_plot(paths, plot_out);
    }
    if (check->parsed())
      return degrpo::cmd_grad_check(check_seed, check_coords, check_h,
                                    check_tol);
  } catch (const degrpo::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return degrpo::kExitConfig;
  } catch (const degrpo::NanAbort& e) {
    std::cerr << "aborted: " << e.what() << "\n"
              << "offending batch:\n"
              << e.dump();
    return degrpo::kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return degrpo::kExitRuntime;
  }
  return degrpo::kExitOk;
}
