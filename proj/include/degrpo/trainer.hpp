#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "degrpo/env.hpp"
#include "degrpo/errors.hpp"
#include "degrpo/objective.hpp"
#include "degrpo/policy.hpp"
#include "degrpo/reward.hpp"
#include "degrpo/rng.hpp"

namespace degrpo {

struct TrainConfig {
  int steps = 100;
  int batch_queries = 64;
  int group_size = 8;
  int inner_epochs = 4;
  double learning_rate = 5e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  ObjectiveConfig objective;
  RewardConfig reward;
};

inline void validate(const TrainConfig& cfg) {
  if (cfg.steps < 1) throw ConfigError("train.steps: must be >= 1");
  if (cfg.batch_queries < 1)
    throw ConfigError("train.batch_queries: must be >= 1");
  if (cfg.group_size < 2) throw ConfigError("train.group_size: must be >= 2");
  if (cfg.inner_epochs < 1)
    throw ConfigError("train.inner_epochs: must be >= 1");
  if (!(cfg.learning_rate > 0.0))
    throw ConfigError("train.learning_rate: must be > 0");
  if (!(cfg.adam_beta1 >= 0.0 && cfg.adam_beta1 < 1.0))
    throw ConfigError("train.adam_beta1: must be in [0,1)");
  if (!(cfg.adam_beta2 >= 0.0 && cfg.adam_beta2 < 1.0))
    throw ConfigError("train.adam_beta2: must be in [0,1)");
  if (!(cfg.weight_decay >= 0.0))
    throw ConfigError("train.weight_decay: must be >= 0");
  validate(cfg.objective);
  validate(cfg.reward);
}

// Per-step training statistics. Mode accuracies are absent (not zero) when no
// rollout of that mode occurred; same for per-profile think fractions.
struct MetricsRecord {
  int step = 0;
  int think_count = 0;
  int short_count = 0;
  double think_fraction = 0.0;
  std::optional<double> acc_short;
  std::optional<double> acc_think;
  int all_correct_short = 0;
  double mean_reward = 0.0;
  double objective_value = 0.0;
  double kl = 0.0;
  std::vector<std::optional<double>> think_frac_by_profile;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step_count = 0;
};

inline constexpr double kAdamEpsilon = 1e-8;

// AdamW ascent step (the objective is maximized) with decoupled weight decay
// applied to the pre-update parameters.
inline void adam_step(PolicyParams& params, std::span<const double> gradient,
                      AdamState& state, const TrainConfig& cfg) {
  const std::size_t n = params.theta.size();
  if (gradient.size() != n)
    throw UsageError("adam_step: gradient dimension mismatch");
  if (state.m.empty()) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
  }
  for (double g : gradient)
    if (!std::isfinite(g)) throw UsageError("adam_step: non-finite gradient");

  state.step_count++;
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, state.step_count);
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, state.step_count);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = gradient[i];
    state.m[i] = cfg.adam_beta1 * state.m[i] + (1.0 - cfg.adam_beta1) * g;
    state.v[i] = cfg.adam_beta2 * state.v[i] + (1.0 - cfg.adam_beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    const double before = params.theta[i];
    params.theta[i] = before +
                      cfg.learning_rate * m_hat /
                          (std::sqrt(v_hat) + kAdamEpsilon) -
                      cfg.learning_rate * cfg.weight_decay * before;
  }
}

// Samples batch_queries groups of group_size rollouts from `policy`, judges
// and scores them, and fills in group advantages. Query q of the step uses
// the child stream fork(q), so the layout is reproducible and could be
// evaluated in parallel per query.
inline std::vector<GroupBatch> sample_rollouts(const Environment& env,
                                               const PolicyParams& policy,
                                               const TrainConfig& cfg,
                                               const Rng& step_rng) {
  std::vector<GroupBatch> groups;
  groups.reserve(static_cast<std::size_t>(cfg.batch_queries));
  for (int q = 0; q < cfg.batch_queries; ++q) {
    Rng rng = step_rng.fork(static_cast<std::uint64_t>(q));
    GroupBatch group;
    group.query = env.sample_query(rng);
    std::vector<double> rewards;
    rewards.reserve(static_cast<std::size_t>(cfg.group_size));
    for (int g = 0; g < cfg.group_size; ++g) {
      Trajectory traj = sample_trajectory(policy, group.query, rng);
      traj.correct = env.judge(traj, group.query, rng);
      traj.reward = compute_reward(traj.control, traj.correct, cfg.reward);
      rewards.push_back(traj.reward);
      group.trajectories.push_back(std::move(traj));
    }
    group.advantages = group_advantages(rewards);
    groups.push_back(std::move(group));
  }
  return groups;
}

inline MetricsRecord collect_metrics(std::span<const GroupBatch> groups,
                                     const Environment& env, int step) {
  MetricsRecord rec;
  rec.step = step;
  int correct_short = 0;
  int correct_think = 0;
  double reward_sum = 0.0;
  std::vector<int> profile_total(static_cast<std::size_t>(env.num_profiles()),
                                 0);
  std::vector<int> profile_think(static_cast<std::size_t>(env.num_profiles()),
                                 0);
  for (const auto& group : groups) {
    bool all_short_correct = !group.trajectories.empty();
    for (const auto& traj : group.trajectories) {
      const bool is_think = traj.control == ControlToken::kThink;
      rec.think_count += is_think ? 1 : 0;
      rec.short_count += is_think ? 0 : 1;
      correct_short += (!is_think && traj.correct) ? 1 : 0;
      correct_think += (is_think && traj.correct) ? 1 : 0;
      reward_sum += traj.reward;
      profile_total[static_cast<std::size_t>(group.query.profile_index)]++;
      profile_think[static_cast<std::size_t>(group.query.profile_index)] +=
          is_think ? 1 : 0;
      all_short_correct = all_short_correct && !is_think && traj.correct;
    }
    rec.all_correct_short += all_short_correct ? 1 : 0;
  }
  const int total = rec.think_count + rec.short_count;
  rec.think_fraction =
      total > 0 ? static_cast<double>(rec.think_count) / total : 0.0;
  if (rec.short_count > 0)
    rec.acc_short = static_cast<double>(correct_short) / rec.short_count;
  if (rec.think_count > 0)
    rec.acc_think = static_cast<double>(correct_think) / rec.think_count;
  rec.mean_reward = total > 0 ? reward_sum / total : 0.0;
  for (int p = 0; p < env.num_profiles(); ++p) {
    if (profile_total[static_cast<std::size_t>(p)] > 0)
      rec.think_frac_by_profile.push_back(
          static_cast<double>(profile_think[static_cast<std::size_t>(p)]) /
          profile_total[static_cast<std::size_t>(p)]);
    else
      rec.think_frac_by_profile.push_back(std::nullopt);
  }
  return rec;
}

struct TrainResult {
  PolicyParams params;
  std::vector<MetricsRecord> metrics;
};

using StepObserver = std::function<void(const MetricsRecord&)>;

namespace detail {

inline std::string dump_batch(std::span<const GroupBatch> groups, int limit) {
  std::ostringstream out;
  int shown = 0;
  for (const auto& group : groups) {
    if (shown++ >= limit) {
      out << "... (" << groups.size() << " groups total)\n";
      break;
    }
    out << "class=" << group.query.class_id << " truth=" << group.query.truth
        << " modes=";
    for (const auto& traj : group.trajectories)
      out << (traj.control == ControlToken::kThink ? 'T' : 'S');
    out << " rewards=";
    for (const auto& traj : group.trajectories) out << traj.reward << ' ';
    out << "advantages=";
    for (double a : group.advantages) out << a << ' ';
    out << '\n';
  }
  return out.str();
}

}  // namespace detail

// The outer RL loop: snapshot the old policy, roll out, score, take
// inner_epochs optimizer steps on the configured objective, record one
// MetricsRecord per step. Fully deterministic given (config, seed). The
// reference policy for the KL term is frozen at `init` and never refreshed.
// `on_step` (when set) sees each record as it is produced.
inline TrainResult run_training(const Environment& env,
                                const PolicyParams& init,
                                const TrainConfig& cfg,
                                const StepObserver& on_step = {}) {
  if (init.dims != dims_for(env))
    throw UsageError("run_training: params do not match the environment");

  TrainResult result{snapshot(init), {}};
  const PolicyParams ref = snapshot(init);
  AdamState adam;
  const Rng base(cfg.seed);

  for (int step = 0; step < cfg.steps; ++step) {
    const PolicyParams old = snapshot(result.params);
    const Rng step_rng = base.fork(static_cast<std::uint64_t>(step));
    const std::vector<GroupBatch> groups =
        sample_rollouts(env, old, cfg, step_rng);

    MetricsRecord rec = collect_metrics(groups, env, step);
    for (int epoch = 0; epoch < cfg.inner_epochs; ++epoch) {
      const ObjectiveReport report =
          objective(groups, result.params, old, ref, cfg.objective);
      if (!std::isfinite(report.value))
        throw NanAbort(step, "non-finite objective value at step " +
                                 std::to_string(step),
                       detail::dump_batch(groups, 8));
      adam_step(result.params, report.gradient, adam, cfg);
      if (!all_finite(result.params.theta))
        throw NanAbort(step, "non-finite parameters after update at step " +
                                 std::to_string(step),
                       detail::dump_batch(groups, 8));
      if (epoch == cfg.inner_epochs - 1) {
        rec.objective_value = report.value;
        rec.kl = report.kl_term;
      }
    }
    if (on_step) on_step(rec);
    result.metrics.push_back(std::move(rec));
  }
  return result;
}

}  // namespace degrpo
