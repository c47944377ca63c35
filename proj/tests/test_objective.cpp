#include <gtest/gtest.h>

#include <cmath>

#include "degrpo/commands.hpp"
#include "degrpo/env.hpp"
#include "degrpo/objective.hpp"
#include "degrpo/trainer.hpp"
#include "oracles.hpp"

using namespace degrpo;
using oracles::make_trajectory;

namespace {

Environment tiny_env() {
  EnvConfig cfg;
  cfg.num_query_classes = 3;
  cfg.profiles = {{"easy", 0.0, 0.0, 0.5}, {"hard", 0.7, 0.1, 0.5}};
  cfg.t_short = 2;
  cfg.t_think = 8;
  cfg.vocab_answer_size = 6;
  cfg.vocab_scratch_size = 4;
  return build_env(cfg, 3);
}

ObjectiveConfig vanilla_cfg(double beta = 0.0) {
  ObjectiveConfig cfg;
  cfg.variant = Variant::kVanillaGrpo;
  cfg.epsilon = 0.2;
  cfg.beta = beta;
  cfg.alpha = 1e-3;
  return cfg;
}

ObjectiveConfig degrpo_cfg(double beta = 0.0, double alpha = 1e-3) {
  ObjectiveConfig cfg;
  cfg.variant = Variant::kDegrpo;
  cfg.epsilon = 0.2;
  cfg.beta = beta;
  cfg.alpha = alpha;
  return cfg;
}

// Short trajectory of response length 1 (answer token only) and think
// trajectory of arbitrary length; logp recorded under `old`.
GroupBatch mixed_group(const PolicyParams& old, const Query& query,
                       double advantage, int think_length) {
  GroupBatch group;
  group.query = query;
  group.trajectories.push_back(
      make_trajectory(old, query, ControlToken::kShort, {query.truth}));
  std::vector<int> think_tokens(static_cast<std::size_t>(think_length - 1),
                                old.dims.answer_vocab);  // scratch token 0
  think_tokens.push_back(query.truth);
  group.trajectories.push_back(
      make_trajectory(old, query, ControlToken::kThink, think_tokens));
  group.advantages = {advantage, -advantage};
  return group;
}

double l2_norm(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

}  // namespace

TEST(TokenSurrogate, RatioOneIdentity) {
  EXPECT_DOUBLE_EQ(token_surrogate(1.0, 0.7, 0.2), 0.7);
}

TEST(TokenSurrogate, ClipBindsAbove) {
  EXPECT_DOUBLE_EQ(token_surrogate(1.5, 1.0, 0.2), 1.2);
}

TEST(TokenSurrogate, NegativeAdvantageBelowBand) {
  EXPECT_DOUBLE_EQ(token_surrogate(0.5, -1.0, 0.2), -0.8);
}

TEST(KlPenalty, ZeroAtReference) {
  const Environment env = tiny_env();
  const std::vector<double> p0(2, 0.5);
  const PolicyParams params = warmup_init(env, p0, p0);
  Rng rng(1);
  const Query query = env.query_for_class(0);
  const Trajectory traj = sample_trajectory(params, query, rng);
  const auto [value, grad] = kl_penalty(params, params, traj);
  EXPECT_DOUBLE_EQ(value, 0.0);
  EXPECT_DOUBLE_EQ(l2_norm(grad), 0.0);
}

TEST(KlPenalty, NonnegativePointwise) {
  const Environment env = tiny_env();
  const std::vector<double> p0(2, 0.5);
  const PolicyParams ref = warmup_init(env, p0, p0);
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    PolicyParams params = ref;
    for (double& theta : params.theta) theta += 2.0 * (rng.uniform() - 0.5);
    const Query query = env.sample_query(rng);
    const Trajectory traj = sample_trajectory(params, query, rng);
    const auto [value, grad] = kl_penalty(params, ref, traj);
    EXPECT_GE(value, 0.0);
  }
}

TEST(KlPenalty, EstimatorMatchesClosedFormOracle) {
  const Environment env = tiny_env();
  const std::vector<double> p0(2, 0.5);
  const PolicyParams ref = warmup_init(env, p0, p0);
  PolicyParams params = ref;
  Rng perturb(17);
  for (double& theta : params.theta)
    theta += 0.8 * (perturb.uniform() - 0.5);

  const Query query = env.query_for_class(1);
  const double expected =
      oracles::expected_trajectory_kl(params, ref, query);
  ASSERT_GT(expected, 1e-4);

  Rng rng(5);
  double mean = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const Trajectory traj = sample_trajectory(params, query, rng);
    mean += kl_penalty(params, ref, traj).first;
  }
  mean /= n;
  EXPECT_NEAR(mean, expected, 0.02 * expected);
}

TEST(Objective, ZeroAdvantagesGiveZeroValueAndGradient) {
  const Environment env = tiny_env();
  const std::vector<double> p0(2, 0.5);
  const PolicyParams params = warmup_init(env, p0, p0);
  TrainConfig tc;
  tc.batch_queries = 4;
  tc.group_size = 4;
  std::vector<GroupBatch> groups =
      sample_rollouts(env, params, tc, Rng(3).fork(0));
  for (auto& group : groups)
    group.advantages.assign(group.advantages.size(), 0.0);

  const ObjectiveReport report =
      grpo_objective(groups, params, params, params, vanilla_cfg(0.0));
  EXPECT_DOUBLE_EQ(report.value, 0.0);
  EXPECT_LE(l2_norm(report.gradient), 1e-12);

  const ObjectiveReport de =
      degrpo_objective(groups, params, params, params, degrpo_cfg(0.0));
  EXPECT_DOUBLE_EQ(de.value, 0.0);
  EXPECT_LE(l2_norm(de.gradient), 1e-12);
}

TEST(Objective, HandComputedTwoTrajectoryInstance) {
  // Single group, G=2, both T=1, ratios 1, rewards [1, -1]: the value
  // vanishes by advantage symmetry and each trajectory splits its advantage
  // evenly between control and response terms.
  const Environment env = tiny_env();
  PolicyParams old = PolicyParams::zeros(dims_for(env));
  const Query query = env.query_for_class(0);
  GroupBatch group;
  group.query = query;
  group.trajectories.push_back(
      make_trajectory(old, query, ControlToken::kShort, {2}));
  group.trajectories.push_back(
      make_trajectory(old, query, ControlToken::kShort, {3}));
  group.advantages = {1.0, -1.0};

  std::vector<GroupBatch> groups{group};
  const ObjectiveReport report =
      grpo_objective(groups, old, old, old, vanilla_cfg(0.0));
  EXPECT_DOUBLE_EQ(report.value, 0.0);

  const auto [c0, r0] = decompose_trajectory_loss(group.trajectories[0], 1.0,
                                                  old, old, vanilla_cfg(0.0));
  EXPECT_DOUBLE_EQ(c0, 0.5);
  EXPECT_DOUBLE_EQ(r0, 0.5);
  const auto [c1, r1] = decompose_trajectory_loss(group.trajectories[1], -1.0,
                                                  old, old, vanilla_cfg(0.0));
  EXPECT_DOUBLE_EQ(c1, -0.5);
  EXPECT_DOUBLE_EQ(r1, -0.5);
}

TEST(Objective, ControlCoefficientContracts) {
  // Vanilla control weight is 1/(T+1): exactly 1/2 at T=1 and 1/51 at T=50.
  // DeGRPO uses alpha for both.
  const Environment env = tiny_env();
  const PolicyParams old = PolicyParams::zeros(dims_for(env));
  const Query query = env.query_for_class(0);
  const double advantage = 0.8;

  const Trajectory t1 =
      make_trajectory(old, query, ControlToken::kShort, {query.truth});
  std::vector<int> long_tokens(49, old.dims.answer_vocab);
  long_tokens.push_back(query.truth);
  const Trajectory t50 =
      make_trajectory(old, query, ControlToken::kThink, long_tokens);

  // Ratios are 1, so L_0 = advantage and the control term exposes the weight.
  const auto [c1, r1] =
      decompose_trajectory_loss(t1, advantage, old, old, vanilla_cfg(0.0));
  EXPECT_EQ(c1, advantage / 2.0);
  const auto [c50, r50] =
      decompose_trajectory_loss(t50, advantage, old, old, vanilla_cfg(0.0));
  EXPECT_EQ(c50, advantage / 51.0);

  // DeGRPO control term is alpha * L_0 regardless of length; probe through
  // the full objective with a single-trajectory group.
  const ObjectiveConfig de = degrpo_cfg(0.0, 1e-3);
  for (const Trajectory* traj : {&t1, &t50}) {
    GroupBatch group;
    group.query = query;
    group.trajectories = {*traj};
    group.advantages = {advantage};
    std::vector<GroupBatch> groups{group};
    const ObjectiveReport report =
        detail::evaluate_objective(groups, old, old, old, de, false);
    EXPECT_EQ(report.control_term, de.alpha * advantage);
  }
}

TEST(Objective, DegrpoAlphaHalfMatchesVanillaControlAtT1) {
  // T=1 and alpha = 1/2: control terms agree exactly; response terms differ
  // by the factor (T+1)/T = 2.
  const Environment env = tiny_env();
  PolicyParams old = PolicyParams::zeros(dims_for(env));
  PolicyParams live = old;
  Rng rng(11);
  for (double& theta : live.theta) theta += 0.1 * (rng.uniform() - 0.5);

  const Query query = env.query_for_class(1);
  const Trajectory traj =
      make_trajectory(old, query, ControlToken::kShort, {query.truth});
  GroupBatch group;
  group.query = query;
  group.trajectories = {traj};
  group.advantages = {0.6};
  std::vector<GroupBatch> groups{group};

  const ObjectiveReport vanilla = detail::evaluate_objective(
      groups, live, old, old, vanilla_cfg(0.0), false);
  const ObjectiveReport decoupled = detail::evaluate_objective(
      groups, live, old, old, degrpo_cfg(0.0, 0.5), false);
  EXPECT_DOUBLE_EQ(decoupled.control_term, vanilla.control_term);
  EXPECT_NEAR(decoupled.response_term, 2.0 * vanilla.response_term, 1e-15);
}

TEST(Objective, DecomposeZeroAdvantage) {
  const Environment env = tiny_env();
  const PolicyParams old = PolicyParams::zeros(dims_for(env));
  const Query query = env.query_for_class(0);
  const Trajectory traj =
      make_trajectory(old, query, ControlToken::kShort, {1});
  const auto [control, response] =
      decompose_trajectory_loss(traj, 0.0, old, old, vanilla_cfg(0.0));
  EXPECT_DOUBLE_EQ(control, 0.0);
  EXPECT_DOUBLE_EQ(response, 0.0);
}

TEST(Objective, DecompositionIdentityOnRandomInstances) {
  const Environment env = tiny_env();
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    PolicyParams old = PolicyParams::zeros(dims_for(env));
    for (double& theta : old.theta) theta = 2.0 * (rng.uniform() - 0.5);
    PolicyParams live = old;
    for (double& theta : live.theta) theta += 0.6 * (rng.uniform() - 0.5);

    const Query query = env.sample_query(rng);
    const Trajectory traj = sample_trajectory(old, query, rng);
    const double advantage = 2.0 * (rng.uniform() - 0.5);

    const auto [control, response] =
        decompose_trajectory_loss(traj, advantage, live, old, vanilla_cfg(0.0));

    // Independent recomputation of the per-trajectory vanilla term with a
    // different summation order.
    const PolicyTable live_table(live);
    const int T = traj.response_length();
    double token_sum = 0.0;
    for (int t = 0; t <= T; ++t) {
      const Slot slot = slot_at(traj.control, t, T);
      const int global = t == 0 ? static_cast<int>(traj.control)
                                : traj.tokens[static_cast<std::size_t>(t - 1)];
      const int local = local_token(live.dims, slot, global);
      const double ratio =
          std::exp(live_table.logp({query.class_id, slot}, local) -
                   traj.logp[static_cast<std::size_t>(t)]);
      token_sum += token_surrogate(ratio, advantage, 0.2);
    }
    EXPECT_NEAR(control + response, token_sum / (T + 1), 1e-14);
  }
}

TEST(Objective, ClipInactiveAtSnapshotPoint) {
  const Environment env = tiny_env();
  const std::vector<double> p0(2, 0.5);
  const PolicyParams params = warmup_init(env, p0, p0);
  TrainConfig tc;
  tc.batch_queries = 6;
  tc.group_size = 4;
  const std::vector<GroupBatch> groups =
      sample_rollouts(env, params, tc, Rng(9).fork(0));
  // At params == old every ratio is 1, so each trajectory's vanilla inner
  // term reduces to its advantage.
  for (const auto& group : groups) {
    for (std::size_t i = 0; i < group.trajectories.size(); ++i) {
      const auto [control, response] = decompose_trajectory_loss(
          group.trajectories[i], group.advantages[i], params, params,
          vanilla_cfg(0.0));
      EXPECT_NEAR(control + response, group.advantages[i], 1e-15);
    }
  }
}

TEST(Objective, ControlGradientLengthIndependenceUnderDegrpo) {
  const Environment env = tiny_env();
  const PolicyParams params = PolicyParams::zeros(dims_for(env));
  const Query query = env.query_for_class(2);
  const double a = 0.7;

  auto control_block_grad = [&](const ObjectiveConfig& cfg, int think_len) {
    const GroupBatch group = mixed_group(params, query, a, think_len);
    std::vector<GroupBatch> groups{group};
    const ObjectiveReport report =
        detail::evaluate_objective(groups, params, params, params, cfg, true);
    const int base = params.dims.index(query.class_id, Slot::kControl, 0);
    return std::pair<double, double>(
        report.gradient[static_cast<std::size_t>(base)],
        report.gradient[static_cast<std::size_t>(base + 1)]);
  };

  const auto de_10 = control_block_grad(degrpo_cfg(0.0, 1e-3), 10);
  const auto de_50 = control_block_grad(degrpo_cfg(0.0, 1e-3), 50);
  EXPECT_DOUBLE_EQ(de_10.first, de_50.first);
  EXPECT_DOUBLE_EQ(de_10.second, de_50.second);
  // Expected magnitude: (1/2) * alpha * a * (e_S - e_T) with pi = (1/2, 1/2).
  EXPECT_NEAR(de_50.first, 0.5 * 1e-3 * a, 1e-15);
  EXPECT_NEAR(de_50.second, -0.5 * 1e-3 * a, 1e-15);

  const auto va_10 = control_block_grad(vanilla_cfg(0.0), 10);
  const auto va_50 = control_block_grad(vanilla_cfg(0.0), 50);
  EXPECT_NE(va_10.first, va_50.first);
  // Vanilla: (1/2)[ (1/2) a (0.5) + (1/(T+1)) a (0.5) ] on the short entry.
  EXPECT_NEAR(va_50.first, 0.5 * a * 0.5 * (0.5 + 1.0 / 51.0), 1e-15);
}

TEST(Objective, ReportValueInvariant) {
  const Environment env = tiny_env();
  const std::vector<double> p0(2, 0.5);
  const PolicyParams ref = warmup_init(env, p0, p0);
  PolicyParams live = ref;
  Rng rng(31);
  for (double& theta : live.theta) theta += 0.3 * (rng.uniform() - 0.5);
  TrainConfig tc;
  tc.batch_queries = 5;
  tc.group_size = 4;
  const std::vector<GroupBatch> groups =
      sample_rollouts(env, ref, tc, Rng(8).fork(2));

  for (const double beta : {0.0, 1e-3, 0.1}) {
    const ObjectiveReport vanilla = detail::evaluate_objective(
        groups, live, ref, ref, vanilla_cfg(beta), false);
    EXPECT_NEAR(vanilla.value,
                vanilla.control_term + vanilla.response_term -
                    beta * vanilla.kl_term,
                1e-15);
    const ObjectiveReport de = detail::evaluate_objective(
        groups, live, ref, ref, degrpo_cfg(beta), false);
    EXPECT_NEAR(de.value,
                de.control_term + de.response_term - beta * de.kl_term, 1e-15);
  }
}

TEST(Objective, IntegrityErrorOnForeignOldPolicy) {
  const Environment env = tiny_env();
  const std::vector<double> p0(2, 0.5);
  const PolicyParams old = warmup_init(env, p0, p0);
  TrainConfig tc;
  tc.batch_queries = 2;
  tc.group_size = 2;
  std::vector<GroupBatch> groups = sample_rollouts(env, old, tc, Rng(4).fork(0));

  PolicyParams other = old;
  other.theta[5] += 0.5;  // a control logit: recorded logp no longer matches
  EXPECT_THROW(
      grpo_objective(groups, old, other, old, vanilla_cfg(0.0), false),
      IntegrityError);

  groups[0].trajectories[0].logp[0] += 1e-6;
  EXPECT_THROW(grpo_objective(groups, old, old, old, vanilla_cfg(0.0), false),
               IntegrityError);
}

TEST(Objective, VariantGuards) {
  const Environment env = tiny_env();
  const PolicyParams params = PolicyParams::zeros(dims_for(env));
  TrainConfig tc;
  tc.batch_queries = 2;
  tc.group_size = 2;
  const std::vector<GroupBatch> groups =
      sample_rollouts(env, params, tc, Rng(1).fork(0));
  EXPECT_THROW(grpo_objective(groups, params, params, params, degrpo_cfg()),
               UsageError);
  EXPECT_THROW(degrpo_objective(groups, params, params, params, vanilla_cfg()),
               UsageError);
  const Trajectory& traj = groups[0].trajectories[0];
  EXPECT_THROW(
      decompose_trajectory_loss(traj, 0.1, params, params, degrpo_cfg()),
      UsageError);
}

TEST(Objective, AnalyticGradientMatchesFiniteDifferences) {
  const GradCheckScenario scenario = make_grad_check_scenario(91, 0.2, 32);
  for (const Variant variant : {Variant::kVanillaGrpo, Variant::kDegrpo}) {
    for (const double beta : {0.0, 1e-3}) {
      const GradReport report =
          run_grad_check(scenario, variant, beta, 1e-5, 1e-5);
      EXPECT_TRUE(report.passed)
          << to_string(variant) << " beta=" << beta
          << " max_rel_error=" << report.max_rel_error;
      EXPECT_GE(report.coordinates_checked, 32);
    }
  }
}
