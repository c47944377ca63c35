#include <gtest/gtest.h>

#include <map>

#include "degrpo/env.hpp"

using namespace degrpo;

namespace {

EnvConfig single_class_config() {
  EnvConfig cfg;
  cfg.num_query_classes = 1;
  cfg.profiles = {{"only", 0.0, 0.0, 1.0}};
  return cfg;
}

EnvConfig three_profile_config(int classes) {
  EnvConfig cfg;
  cfg.num_query_classes = classes;
  cfg.profiles = {{"easy", 0.0, 0.0, 1.0 / 3},
                  {"medium", 0.3, 0.05, 1.0 / 3},
                  {"hard", 0.8, 0.1, 1.0 / 3}};
  return cfg;
}

// Truth-emitting trajectory for the given query and mode, used as an oracle
// for achievable accuracy.
Trajectory oracle_trajectory(const Environment& env, const Query& query,
                             ControlToken mode) {
  Trajectory traj;
  traj.query = query;
  traj.control = mode;
  const int T = env.template_length(mode);
  for (int t = 1; t < T; ++t)
    traj.tokens.push_back(env.config().vocab_answer_size);  // any scratch token
  traj.tokens.push_back(query.truth);
  traj.logp.assign(static_cast<std::size_t>(T) + 1, 0.0);
  return traj;
}

}  // namespace

TEST(Env, SingleClassAlwaysClassZero) {
  const Environment env = build_env(single_class_config(), 0);
  Rng rng(3);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(env.sample_query(rng).class_id, 0);
}

TEST(Env, SameConfigAndSeedGiveIdenticalTables) {
  const EnvConfig cfg = three_profile_config(30);
  const Environment a = build_env(cfg, 9);
  const Environment b = build_env(cfg, 9);
  for (int c = 0; c < 30; ++c) {
    ASSERT_EQ(a.truth_of(c), b.truth_of(c));
    ASSERT_EQ(a.profile_of(c), b.profile_of(c));
  }
}

TEST(Env, RoundRobinAssignmentSplitsEqually) {
  const Environment env = build_env(three_profile_config(30), 1);
  // Round-robin with equal weights: each profile owns exactly 10 classes.
  std::map<int, int> owned;
  for (int c = 0; c < 30; ++c) owned[env.profile_of(c)]++;
  ASSERT_EQ(owned.size(), 3u);
  for (const auto& [profile, count] : owned) EXPECT_EQ(count, 10);
  // Enumerated dealing order: class c goes to profile c % 3 until quotas fill.
  for (int c = 0; c < 30; ++c) EXPECT_EQ(env.profile_of(c), c % 3);
}

TEST(Env, TruthRoundRobinOverAnswerVocab) {
  const Environment env = build_env(three_profile_config(30), 1);
  for (int c = 0; c < 30; ++c)
    EXPECT_EQ(env.truth_of(c), c % env.config().vocab_answer_size);
}

TEST(Env, ZeroWeightProfileNeverSampled) {
  EnvConfig cfg;
  cfg.num_query_classes = 10;
  cfg.profiles = {{"a", 0.0, 0.0, 1.0}, {"b", 0.0, 0.0, 0.0}};
  const Environment env = build_env(cfg, 0);
  Rng rng(17);
  for (int i = 0; i < 20000; ++i)
    ASSERT_EQ(env.sample_query(rng).profile_index, 0);
}

TEST(Env, EqualWeightsSampleNearFiftyFifty) {
  EnvConfig cfg;
  cfg.num_query_classes = 10;
  cfg.profiles = {{"a", 0.0, 0.0, 0.5}, {"b", 0.0, 0.0, 0.5}};
  const Environment env = build_env(cfg, 0);
  Rng rng(123);
  int first = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i)
    first += env.sample_query(rng).profile_index == 0 ? 1 : 0;
  EXPECT_NEAR(static_cast<double>(first) / n, 0.5, 0.01);
}

TEST(Env, InvalidConfigsRejected) {
  EnvConfig bad = three_profile_config(10);
  bad.profiles[0].weight = 0.5;  // weights no longer sum to 1
  EXPECT_THROW(build_env(bad, 0), ConfigError);

  EnvConfig short_template = three_profile_config(10);
  short_template.t_think = short_template.t_short;
  EXPECT_THROW(build_env(short_template, 0), ConfigError);

  EnvConfig tiny = three_profile_config(10);
  tiny.t_short = 1;
  EXPECT_THROW(build_env(tiny, 0), ConfigError);
}

TEST(Env, ExtractAnswerAtTemplatePosition) {
  const Environment env = build_env(single_class_config(), 0);
  const Query query = env.query_for_class(0);

  Trajectory short_traj;
  short_traj.query = query;
  short_traj.control = ControlToken::kShort;
  short_traj.tokens = {env.config().vocab_answer_size, 7};  // scratch, A7
  ASSERT_TRUE(env.extract_answer(short_traj).has_value());
  EXPECT_EQ(*env.extract_answer(short_traj), 7);

  Trajectory scratch_end = short_traj;
  scratch_end.tokens.back() = env.config().vocab_answer_size + 3;  // s3
  EXPECT_FALSE(env.extract_answer(scratch_end).has_value());

  Trajectory empty;
  empty.query = query;
  EXPECT_FALSE(env.extract_answer(empty).has_value());
}

TEST(Env, JudgeMismatchDominatesNoise) {
  const Environment env = build_env(single_class_config(), 0);
  const Query query = env.query_for_class(0);
  Trajectory traj = oracle_trajectory(env, query, ControlToken::kShort);
  traj.tokens.back() = (query.truth + 1) % env.config().vocab_answer_size;
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) ASSERT_FALSE(env.judge(traj, query, rng));
}

TEST(Env, JudgeNoiselessCorrect) {
  const Environment env = build_env(single_class_config(), 0);
  const Query query = env.query_for_class(0);
  const Trajectory traj = oracle_trajectory(env, query, ControlToken::kShort);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) ASSERT_TRUE(env.judge(traj, query, rng));
}

TEST(Env, JudgeFlipRateMatchesEta) {
  EnvConfig cfg = single_class_config();
  cfg.profiles[0].eta_short = 0.8;
  const Environment env = build_env(cfg, 0);
  const Query query = env.query_for_class(0);
  const Trajectory traj = oracle_trajectory(env, query, ControlToken::kShort);
  Rng rng(99);
  int correct = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) correct += env.judge(traj, query, rng) ? 1 : 0;
  EXPECT_NEAR(static_cast<double>(correct) / n, 0.2, 0.01);
}

TEST(Env, MaxAchievableAccuracyPerMode) {
  const EnvConfig cfg = three_profile_config(30);
  const Environment env = build_env(cfg, 5);
  Rng rng(7);
  const int n = 40000;
  for (int p = 0; p < env.num_profiles(); ++p) {
    const Query query = env.query_for_class(env.classes_of(p).front());
    for (const ControlToken mode : {ControlToken::kShort, ControlToken::kThink}) {
      const Trajectory traj = oracle_trajectory(env, query, mode);
      int correct = 0;
      for (int i = 0; i < n; ++i) correct += env.judge(traj, query, rng) ? 1 : 0;
      const double eta = mode == ControlToken::kShort
                             ? env.profile(p).eta_short
                             : env.profile(p).eta_think;
      EXPECT_NEAR(static_cast<double>(correct) / n, 1.0 - eta, 0.015)
          << "profile " << p << " mode " << to_string(mode);
    }
  }
}

TEST(Env, JudgeIsPureGivenRngState) {
  EnvConfig cfg = single_class_config();
  cfg.profiles[0].eta_short = 0.5;
  const Environment env = build_env(cfg, 0);
  const Query query = env.query_for_class(0);
  const Trajectory traj = oracle_trajectory(env, query, ControlToken::kShort);
  Rng a(31337);
  Rng b = a;  // replay the same stream
  for (int i = 0; i < 5000; ++i)
    ASSERT_EQ(env.judge(traj, query, a), env.judge(traj, query, b));
}
