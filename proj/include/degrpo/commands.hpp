#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "degrpo/config.hpp"
#include "degrpo/env.hpp"
#include "degrpo/errors.hpp"
#include "degrpo/gradcheck.hpp"
#include "degrpo/io.hpp"
#include "degrpo/policy.hpp"
#include "degrpo/svg.hpp"
#include "degrpo/trainer.hpp"

namespace degrpo {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitProperty = 3;

// ---------------------------------------------------------------------------
// Analysis helpers shared by the compare/sweep properties and the acceptance
// suite.
// ---------------------------------------------------------------------------

// Exact mean P(think | x) per difficulty profile, averaged over the profile's
// classes.
inline std::vector<double> mean_think_by_profile(const Environment& env,
                                                 const PolicyParams& params) {
  std::vector<double> means(static_cast<std::size_t>(env.num_profiles()), 0.0);
  for (int p = 0; p < env.num_profiles(); ++p) {
    const auto& classes = env.classes_of(p);
    if (classes.empty()) continue;
    double sum = 0.0;
    for (int c : classes)
      sum += control_distribution(params, env.query_for_class(c))[1];
    means[static_cast<std::size_t>(p)] = sum / static_cast<double>(classes.size());
  }
  return means;
}

// Trailing-window moving average; entry s averages steps max(0, s-w+1)..s.
inline std::vector<double> trailing_mean(const std::vector<double>& values,
                                         int window) {
  std::vector<double> out(values.size(), 0.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    acc += values[i];
    if (i >= static_cast<std::size_t>(window)) acc -= values[i - window];
    const std::size_t n = std::min(i + 1, static_cast<std::size_t>(window));
    out[i] = acc / static_cast<double>(n);
  }
  return out;
}

struct CollapseStats {
  std::optional<int> collapse_step;  // first step with minority mode < lo
  bool recovered_after = false;      // minority mode exceeded hi later on
  double final_minority = 0.0;
};

inline double minority_fraction(const MetricsRecord& rec) {
  return std::min(rec.think_fraction, 1.0 - rec.think_fraction);
}

inline CollapseStats analyze_collapse(const std::vector<MetricsRecord>& metrics,
                                      double lo = 0.05, double hi = 0.10) {
  CollapseStats stats;
  for (const auto& rec : metrics) {
    const double minority = minority_fraction(rec);
    if (!stats.collapse_step && minority < lo) stats.collapse_step = rec.step;
    if (stats.collapse_step && minority > hi) stats.recovered_after = true;
  }
  if (!metrics.empty()) stats.final_minority = minority_fraction(metrics.back());
  return stats;
}

// First step whose all_correct_short strictly exceeds `threshold`.
inline std::optional<int> first_crossing(
    const std::vector<MetricsRecord>& metrics, double threshold) {
  for (const auto& rec : metrics)
    if (static_cast<double>(rec.all_correct_short) > threshold)
      return rec.step;
  return std::nullopt;
}

// Upper-median with absent values sorting as +infinity.
inline std::optional<int> median_crossing(
    std::vector<std::optional<int>> crossings) {
  if (crossings.empty()) return std::nullopt;
  auto key = [](const std::optional<int>& v) {
    return v.has_value() ? static_cast<long>(*v)
                         : std::numeric_limits<long>::max();
  };
  std::sort(crossings.begin(), crossings.end(),
            [&](const auto& a, const auto& b) { return key(a) < key(b); });
  return crossings[crossings.size() / 2];
}

// ---------------------------------------------------------------------------
// Run directory management and the train command.
// ---------------------------------------------------------------------------

inline std::filesystem::path default_output_root() {
  if (const char* root = std::getenv("DEGRPO_LAB_OUT")) return root;
  return "runs";
}

// Output files are never silently overwritten: a directory already holding
// any of the probe files gets a numeric suffix instead.
inline std::filesystem::path suffix_if_occupied(
    const std::filesystem::path& dir, std::initializer_list<const char*> probes) {
  auto occupied = [&probes](const std::filesystem::path& d) {
    for (const char* probe : probes)
      if (std::filesystem::exists(d / probe)) return true;
    return false;
  };
  if (!occupied(dir)) return dir;
  for (int k = 1;; ++k) {
    std::filesystem::path candidate = dir;
    candidate += "-" + std::to_string(k);
    if (!occupied(candidate)) return candidate;
  }
}

inline std::filesystem::path resolve_run_dir(const RunConfig& cfg) {
  std::filesystem::path dir;
  if (!cfg.output_dir.empty()) {
    dir = cfg.output_dir;
  } else {
    const std::string name = (cfg.preset.empty() ? "run" : cfg.preset) +
                             "-seed" + std::to_string(cfg.train.seed);
    dir = default_output_root() / name;
  }
  return suffix_if_occupied(dir, {"metrics.csv", "config.json", "summary.json"});
}

inline std::vector<std::string> profile_names(const RunConfig& cfg) {
  std::vector<std::string> names;
  for (const auto& p : cfg.env.profiles) names.push_back(p.name);
  return names;
}

inline Json summarize_run(const RunConfig& cfg, const TrainResult& result) {
  Json j;
  j["preset"] = cfg.preset;
  j["variant"] = to_string(cfg.train.objective.variant);
  j["seed"] = cfg.train.seed;
  j["steps"] = cfg.train.steps;
  j["alpha"] = cfg.train.objective.alpha;
  j["beta"] = cfg.train.objective.beta;
  j["epsilon"] = cfg.train.objective.epsilon;
  j["gamma"] = cfg.train.reward.gamma;
  j["learning_rate"] = cfg.train.learning_rate;
  j["params"] = "params.bin";

  auto record_json = [](const MetricsRecord& rec) {
    Json r;
    r["step"] = rec.step;
    r["think_fraction"] = rec.think_fraction;
    if (rec.acc_short) r["acc_short"] = *rec.acc_short;
    if (rec.acc_think) r["acc_think"] = *rec.acc_think;
    r["all_correct_short"] = rec.all_correct_short;
    r["mean_reward"] = rec.mean_reward;
    r["objective"] = rec.objective_value;
    r["kl"] = rec.kl;
    return r;
  };
  if (!result.metrics.empty())
    j["final"] = record_json(result.metrics.back());

  const int window = std::min<int>(20, static_cast<int>(result.metrics.size()));
  if (window > 0) {
    double think = 0.0, reward = 0.0, correct_short = 0.0;
    for (int i = 0; i < window; ++i) {
      const auto& rec = result.metrics[result.metrics.size() - 1 -
                                       static_cast<std::size_t>(i)];
      think += rec.think_fraction;
      reward += rec.mean_reward;
      correct_short += rec.all_correct_short;
    }
    j["last20"] = {{"window", window},
                   {"think_fraction", think / window},
                   {"mean_reward", reward / window},
                   {"all_correct_short", correct_short / window}};
  }
  return j;
}

struct RunArtifacts {
  std::filesystem::path dir;
  TrainResult result;
};

// Validates, trains, and writes config.json / metrics.csv / summary.json /
// params.bin into the resolved run directory. The config echo lands before
// training and metrics rows are appended per step, so an aborted run still
// leaves its configuration and partial metrics behind.
inline RunArtifacts run_and_write(const RunConfig& cfg) {
  validate(cfg);
  const std::filesystem::path dir = resolve_run_dir(cfg);
  std::filesystem::create_directories(dir);
  write_text_file(dir / "config.json", to_json(cfg).dump(2) + "\n");

  const Environment env = build_env(cfg.env, cfg.env.seed);
  const PolicyParams init =
      warmup_init(env, cfg.warmup.p0_short, cfg.warmup.p0_think);

  std::ofstream metrics(dir / "metrics.csv", std::ios::binary | std::ios::trunc);
  if (!metrics)
    throw ConfigError("cannot open for writing: " + (dir / "metrics.csv").string());
  metrics << kMetricsHeader << '\n';
  const std::array<int, 3> column_profile =
      profile_column_map(profile_names(cfg));
  TrainResult result =
      run_training(env, init, cfg.train, [&](const MetricsRecord& rec) {
        metrics << metrics_csv_row(rec, column_profile);
        metrics.flush();
      });
  metrics.close();

  write_text_file(dir / "summary.json",
                  summarize_run(cfg, result).dump(2) + "\n");
  save_params(dir / "params.bin", result.params);
  return RunArtifacts{dir, std::move(result)};
}

inline int cmd_train(const RunConfig& cfg, std::ostream& out = std::cout) {
  const RunArtifacts run = run_and_write(cfg);
  out << "run dir: " << run.dir.string() << "\n";
  if (!run.result.metrics.empty()) {
    const auto& rec = run.result.metrics.back();
    out << "final think_fraction = " << format_double(rec.think_fraction)
        << "\n";
    out << "final acc_short = "
        << (rec.acc_short ? format_double(*rec.acc_short) : "n/a") << "\n";
    out << "final acc_think = "
        << (rec.acc_think ? format_double(*rec.acc_think) : "n/a") << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// compare: vanilla vs decoupled arms on the same environment and seeds.
// ---------------------------------------------------------------------------

inline int cmd_compare(const RunConfig& base,
                       const std::vector<std::uint64_t>& seeds,
                       const std::string& out_dir,
                       std::ostream& out = std::cout) {
  if (seeds.empty()) throw ConfigError("compare: at least one seed required");
  const std::filesystem::path root = suffix_if_occupied(
      out_dir.empty() ? default_output_root() / "compare"
                      : std::filesystem::path(out_dir),
      {"compare_summary.json"});
  std::filesystem::create_directories(root);

  const Variant variants[2] = {Variant::kVanillaGrpo, Variant::kDegrpo};
  std::vector<Chart> charts;
  bool property_ok = true;
  Json summary;
  for (const Variant variant : variants) {
    Chart chart;
    chart.title = std::string(to_string(variant)) + " think count";
    chart.x_label = "step";
    chart.y_label = "think rollouts";
    Json arm = Json::array();
    for (const std::uint64_t seed : seeds) {
      RunConfig cfg = base;
      cfg.train.objective.variant = variant;
      cfg.train.seed = seed;
      cfg.output_dir =
          (root / (std::string(to_string(variant)) + "-seed" +
                   std::to_string(seed)))
              .string();
      const RunArtifacts run = run_and_write(cfg);

      Series series;
      series.label = "seed" + std::to_string(seed);
      for (const auto& rec : run.result.metrics) {
        series.x.push_back(rec.step);
        series.y.push_back(rec.think_count);
      }
      chart.series.push_back(std::move(series));

      const CollapseStats stats = analyze_collapse(run.result.metrics);
      const bool collapsed = stats.collapse_step && !stats.recovered_after;
      const bool retained = !stats.collapse_step.has_value();
      const bool ok = variant == Variant::kVanillaGrpo ? collapsed : retained;
      property_ok = property_ok && ok;
      Json r;
      r["seed"] = seed;
      r["collapse_step"] =
          stats.collapse_step ? Json(*stats.collapse_step) : Json(nullptr);
      r["recovered_after"] = stats.recovered_after;
      r["final_minority_fraction"] = stats.final_minority;
      r["property_ok"] = ok;
      arm.push_back(r);
      out << to_string(variant) << " seed " << seed << ": "
          << (stats.collapse_step
                  ? "minority < 5% at step " + std::to_string(*stats.collapse_step)
                  : std::string("both modes retained"))
          << (ok ? "" : "  [property violated]") << "\n";
    }
    summary[to_string(variant)] = arm;
    charts.push_back(std::move(chart));
  }
  summary["property_ok"] = property_ok;
  write_text_file(root / "compare.svg", render_chart_grid(charts, 2));
  write_text_file(root / "compare_summary.json", summary.dump(2) + "\n");
  out << "compare outputs in " << root.string() << "\n";
  return property_ok ? kExitOk : kExitProperty;
}

// ---------------------------------------------------------------------------
// sweep-alpha: first emergence of all-correct short groups per alpha.
// ---------------------------------------------------------------------------

inline int cmd_sweep_alpha(const RunConfig& base,
                           const std::vector<double>& alphas,
                           const std::vector<std::uint64_t>& seeds,
                           std::optional<double> threshold,
                           const std::string& out_dir,
                           std::ostream& out = std::cout) {
  if (alphas.empty()) throw ConfigError("sweep: at least one alpha required");
  for (double a : alphas)
    if (!(a > 0.0)) throw ConfigError("sweep: alphas must be > 0");
  if (seeds.empty()) throw ConfigError("sweep: at least one seed required");
  const double crossing_threshold =
      threshold.value_or(0.25 * base.train.batch_queries);

  const std::filesystem::path root = suffix_if_occupied(
      out_dir.empty() ? default_output_root() / "alpha-sweep"
                      : std::filesystem::path(out_dir),
      {"sweep_summary.json"});
  std::filesystem::create_directories(root);

  Chart chart;
  chart.title = "all-correct short groups per step";
  chart.x_label = "step";
  chart.y_label = "all_correct_short";
  std::string table = "alpha,seed,first_step\n";
  std::vector<std::vector<std::optional<int>>> crossings(alphas.size());
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    for (const std::uint64_t seed : seeds) {
      RunConfig cfg = base;
      cfg.train.objective.alpha = alphas[a];
      cfg.train.seed = seed;
      cfg.output_dir = (root / ("alpha" + format_double(alphas[a]) + "-seed" +
                                std::to_string(seed)))
                           .string();
      const RunArtifacts run = run_and_write(cfg);

      Series series;
      series.label = "a=" + format_double(alphas[a]) + " s" +
                     std::to_string(seed);
      for (const auto& rec : run.result.metrics) {
        series.x.push_back(rec.step);
        series.y.push_back(rec.all_correct_short);
      }
      chart.series.push_back(std::move(series));

      const auto cross = first_crossing(run.result.metrics, crossing_threshold);
      crossings[a].push_back(cross);
      table += format_double(alphas[a]) + "," + std::to_string(seed) + "," +
               (cross ? std::to_string(*cross) : std::string("never")) + "\n";
    }
  }
  write_text_file(root / "sweep.csv", table);
  write_text_file(root / "sweep.svg", render_charts({chart}, 640.0, 320.0));

  Json summary;
  summary["threshold"] = crossing_threshold;
  Json per_alpha = Json::array();
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    const auto median = median_crossing(crossings[a]);
    Json ja;
    ja["alpha"] = alphas[a];
    ja["median_first_step"] = median ? Json(*median) : Json(nullptr);
    per_alpha.push_back(ja);
  }
  summary["alphas"] = per_alpha;

  // Property: the largest alpha's median crossing strictly precedes the
  // smallest alpha's.
  bool property_ok = true;
  if (alphas.size() >= 2) {
    const std::size_t hi = static_cast<std::size_t>(
        std::max_element(alphas.begin(), alphas.end()) - alphas.begin());
    const std::size_t lo = static_cast<std::size_t>(
        std::min_element(alphas.begin(), alphas.end()) - alphas.begin());
    const auto hi_median = median_crossing(crossings[hi]);
    const auto lo_median = median_crossing(crossings[lo]);
    const long hi_key = hi_median ? *hi_median : std::numeric_limits<long>::max();
    const long lo_key = lo_median ? *lo_median : std::numeric_limits<long>::max();
    property_ok = hi_key < lo_key;
    summary["property_ok"] = property_ok;
    out << "median first crossing: alpha=" << format_double(alphas[hi]) << " -> "
        << (hi_median ? std::to_string(*hi_median) : std::string("never"))
        << ", alpha=" << format_double(alphas[lo]) << " -> "
        << (lo_median ? std::to_string(*lo_median) : std::string("never"))
        << (property_ok ? "" : "  [property violated]") << "\n";
  }
  write_text_file(root / "sweep_summary.json", summary.dump(2) + "\n");
  out << "sweep outputs in " << root.string() << "\n";
  return property_ok ? kExitOk : kExitProperty;
}

// ---------------------------------------------------------------------------
// policy-histogram: distribution of P(think | x) under saved parameters.
// ---------------------------------------------------------------------------

inline int cmd_policy_histogram(const RunConfig& cfg,
                                const std::filesystem::path& params_path,
                                int samples, const std::string& out_dir,
                                std::ostream& out = std::cout) {
  if (samples < 1) throw ConfigError("histogram: samples must be >= 1");
  validate(cfg.env);
  const Environment env = build_env(cfg.env, cfg.env.seed);
  const PolicyParams params = load_params(params_path);
  if (params.dims != dims_for(env))
    throw ConfigError("histogram: params file does not match the environment "
                      "(dimension mismatch)");

  const std::filesystem::path root = suffix_if_occupied(
      out_dir.empty() ? default_output_root() / "histogram"
                      : std::filesystem::path(out_dir),
      {"histogram.csv"});
  std::filesystem::create_directories(root);

  constexpr int kBins = 20;
  std::vector<int> bins(kBins, 0);
  Rng rng = Rng(cfg.env.seed).fork(0x68697374u);  // independent of training
  for (int i = 0; i < samples; ++i) {
    const Query query = env.sample_query(rng);
    const double p_think = control_distribution(params, query)[1];
    int b = static_cast<int>(p_think * kBins);
    b = std::clamp(b, 0, kBins - 1);
    bins[static_cast<std::size_t>(b)]++;
  }

  std::string csv = "bin_lo,bin_hi,count\n";
  Series series;
  series.label = "queries";
  for (int b = 0; b < kBins; ++b) {
    const double lo = static_cast<double>(b) / kBins;
    const double hi = static_cast<double>(b + 1) / kBins;
    csv += format_double(lo) + "," + format_double(hi) + "," +
           std::to_string(bins[static_cast<std::size_t>(b)]) + "\n";
    series.x.push_back((lo + hi) / 2.0);
    series.y.push_back(bins[static_cast<std::size_t>(b)]);
  }
  write_text_file(root / "histogram.csv", csv);
  Chart chart;
  chart.title = "P(think) over sampled queries";
  chart.x_label = "P(think)";
  chart.y_label = "count";
  chart.series.push_back(std::move(series));
  write_text_file(root / "histogram.svg", render_charts({chart}, 640.0, 320.0));

  const std::vector<double> means = mean_think_by_profile(env, params);
  for (int p = 0; p < env.num_profiles(); ++p)
    out << "mean P(think | " << env.profile(p).name
        << ") = " << format_double(means[static_cast<std::size_t>(p)]) << "\n";
  out << "histogram outputs in " << root.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// plot: render metrics CSVs as SVG line charts.
// ---------------------------------------------------------------------------

inline int cmd_plot(const std::vector<std::filesystem::path>& csv_paths,
                    const std::filesystem::path& out_path,
                    std::ostream& out = std::cout) {
  if (csv_paths.empty()) throw ConfigError("plot: no input files");
  Chart think{"think fraction", "step", "fraction", {}, 0.0, 1.0};
  Chart accuracy{"per-mode accuracy", "step", "accuracy", {}, 0.0, 1.0};
  Chart allcorrect{"all-correct short groups", "step", "count", {}, {}, {}};

  for (const auto& path : csv_paths) {
    const MetricsTable table =
        parse_metrics_csv(read_text_file(path), path.string());
    const std::string stem = path.stem().string();
    auto column = [&table](const std::string& name) {
      const int idx = table.column_index(name);
      std::vector<double> values;
      for (const auto& row : table.rows) {
        const auto& cell = row[static_cast<std::size_t>(idx)];
        values.push_back(cell.value_or(
            std::numeric_limits<double>::quiet_NaN()));
      }
      return values;
    };
    const std::vector<double> steps = column("step");
    think.series.push_back(Series{stem, steps, column("think_fraction")});
    accuracy.series.push_back(
        Series{stem + " short", steps, column("acc_short")});
    accuracy.series.push_back(
        Series{stem + " think", steps, column("acc_think")});
    allcorrect.series.push_back(
        Series{stem, steps, column("all_correct_short")});
  }
  write_text_file(out_path, render_charts({think, accuracy, allcorrect}));
  out << "wrote " << out_path.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// grad-check: finite-difference verification of both objectives.
// ---------------------------------------------------------------------------

struct GradCheckScenario {
  Environment env;
  PolicyParams live;
  PolicyParams old;
  PolicyParams ref;
  std::vector<GroupBatch> groups;
  std::vector<int> coordinates;
};

// Frozen rollouts from a warm policy plus a perturbed live parameter point
// whose token ratios all stay at least `kink_margin` away from the clip
// boundaries. Coordinates are drawn half from the control blocks and half
// from the response blocks of visited classes.
inline GradCheckScenario make_grad_check_scenario(std::uint64_t seed,
                                                  double epsilon,
                                                  int num_coordinates,
                                                  double kink_margin = 1e-3) {
  EnvConfig env_cfg;
  env_cfg.num_query_classes = 6;
  env_cfg.profiles = {{"easy", 0.0, 0.0, 0.5}, {"hard", 0.6, 0.1, 0.5}};
  env_cfg.t_short = 2;
  env_cfg.t_think = 12;
  env_cfg.vocab_answer_size = 6;
  env_cfg.vocab_scratch_size = 5;
  env_cfg.seed = seed;

  GradCheckScenario scenario{build_env(env_cfg, seed),
                             PolicyParams{},
                             PolicyParams{},
                             PolicyParams{},
                             {},
                             {}};
  const std::vector<double> p0(2, 0.45);
  scenario.old = warmup_init(scenario.env, p0, p0);
  scenario.ref = scenario.old;

  TrainConfig rollout_cfg;
  rollout_cfg.batch_queries = 8;
  rollout_cfg.group_size = 8;
  rollout_cfg.reward.gamma = 0.1;
  scenario.groups = sample_rollouts(scenario.env, scenario.old, rollout_cfg,
                                    Rng(seed).fork(1));

  // Grow the perturbation until some ratios clip, but reject points with a
  // token ratio too close to a kink.
  Rng rng = Rng(seed).fork(2);
  const PolicyTable old_table(scenario.old);
  int attempts = 0;
  for (double scale = 0.35;; scale *= 1.07) {
    if (++attempts > 100)
      throw UsageError("grad-check: no kink-free parameter point found");
    scenario.live = scenario.old;
    Rng draw = rng.fork(static_cast<std::uint64_t>(scale * 1e6));
    for (double& theta : scenario.live.theta)
      theta += scale * (2.0 * draw.uniform() - 1.0);

    const PolicyTable live_table(scenario.live);
    bool near_kink = false;
    bool any_clipped = false;
    for (const auto& group : scenario.groups) {
      for (const auto& traj : group.trajectories) {
        const int T = traj.response_length();
        for (int t = 0; t <= T; ++t) {
          const Slot slot = slot_at(traj.control, t, T);
          const int global =
              t == 0 ? static_cast<int>(traj.control) : traj.tokens[t - 1];
          const int local = local_token(scenario.live.dims, slot, global);
          const Context ctx{traj.query.class_id, slot};
          const double ratio =
              std::exp(live_table.logp(ctx, local) - old_table.logp(ctx, local));
          if (std::fabs(ratio - (1.0 - epsilon)) < kink_margin ||
              std::fabs(ratio - (1.0 + epsilon)) < kink_margin)
            near_kink = true;
          if (ratio < 1.0 - epsilon || ratio > 1.0 + epsilon)
            any_clipped = true;
        }
      }
    }
    if (!near_kink && any_clipped) break;
  }

  // Coordinate sample: alternate control and response features over visited
  // classes.
  const PolicyDims& dims = scenario.live.dims;
  std::vector<int> visited;
  for (const auto& group : scenario.groups) {
    const int c = group.query.class_id;
    if (std::find(visited.begin(), visited.end(), c) == visited.end())
      visited.push_back(c);
  }
  Rng pick = Rng(seed).fork(3);
  for (int i = 0; i < num_coordinates; ++i) {
    const int c = visited[static_cast<std::size_t>(
        pick.next_u64() % visited.size())];
    if (i % 2 == 0) {
      scenario.coordinates.push_back(
          dims.index(c, Slot::kControl,
                     static_cast<int>(pick.next_u64() % 2)));
    } else {
      const Slot slots[4] = {Slot::kShortScratch, Slot::kShortAnswer,
                             Slot::kThinkScratch, Slot::kThinkAnswer};
      const Slot slot = slots[pick.next_u64() % 4];
      scenario.coordinates.push_back(
          dims.index(c, slot,
                     static_cast<int>(pick.next_u64() %
                                      static_cast<std::uint64_t>(
                                          dims.slot_size(slot)))));
    }
  }
  return scenario;
}

inline GradReport run_grad_check(const GradCheckScenario& scenario,
                                 Variant variant, double beta, double h,
                                 double rel_tol) {
  ObjectiveConfig cfg;
  cfg.variant = variant;
  cfg.epsilon = 0.2;
  cfg.beta = beta;
  cfg.alpha = 1e-3;

  const ObjectiveReport analytic_report =
      objective(scenario.groups, scenario.live, scenario.old, scenario.ref,
                cfg, true);
  std::vector<double> analytic;
  for (int k : scenario.coordinates)
    analytic.push_back(analytic_report.gradient[static_cast<std::size_t>(k)]);

  const auto value_of = [&](const PolicyParams& p) {
    return objective(scenario.groups, p, scenario.old, scenario.ref, cfg,
                     false)
        .value;
  };
  const std::vector<double> numeric = finite_difference_gradient(
      value_of, scenario.live, scenario.coordinates, h);

  GradReport report =
      verify(analytic, numeric, scenario.coordinates, rel_tol, 1e-10);
  report.step_size = h;
  return report;
}

inline int cmd_grad_check(std::uint64_t seed, int num_coordinates, double h,
                          double rel_tol, std::ostream& out = std::cout) {
  const GradCheckScenario scenario =
      make_grad_check_scenario(seed, 0.2, num_coordinates);
  bool all_ok = true;
  for (const Variant variant : {Variant::kVanillaGrpo, Variant::kDegrpo}) {
    for (const double beta : {0.0, 1e-3}) {
      const GradReport report =
          run_grad_check(scenario, variant, beta, h, rel_tol);
      all_ok = all_ok && report.passed;
      out << "grad-check " << to_string(variant) << " beta=" << format_double(beta)
          << " coords=" << report.coordinates_checked
          << " max_rel_error=" << format_double(report.max_rel_error)
          << " worst=" << report.worst_coordinate << " h=" << format_double(h)
          << (report.passed ? "  PASS" : "  FAIL") << "\n";
    }
  }
  return all_ok ? kExitOk : kExitProperty;
}

}  // namespace degrpo
