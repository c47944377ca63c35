#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "degrpo/errors.hpp"
#include "degrpo/rng.hpp"
#include "degrpo/types.hpp"

namespace degrpo {

// Difficulty is modeled as a per-mode correctness-flip rate: even a
// truth-emitting policy cannot exceed accuracy 1 - eta_mode.
struct DifficultyProfile {
  std::string name;
  double eta_short = 0.0;
  double eta_think = 0.0;
  double weight = 1.0;
};

struct EnvConfig {
  int num_query_classes = 1;
  std::vector<DifficultyProfile> profiles;
  int t_short = 2;
  int t_think = 50;
  int vocab_answer_size = 10;
  int vocab_scratch_size = 8;
  std::uint64_t seed = 0;
};

inline void validate(const EnvConfig& cfg) {
  if (cfg.num_query_classes < 1)
    throw ConfigError("env.classes: must be >= 1");
  if (cfg.profiles.empty()) throw ConfigError("env.profiles: must be nonempty");
  double weight_sum = 0.0;
  for (std::size_t i = 0; i < cfg.profiles.size(); ++i) {
    const auto& p = cfg.profiles[i];
    const std::string key = "env.profiles[" + std::to_string(i) + "]";
    if (!(p.eta_short >= 0.0 && p.eta_short <= 1.0))
      throw ConfigError(key + ".eta_short: must be in [0,1]");
    if (!(p.eta_think >= 0.0 && p.eta_think <= 1.0))
      throw ConfigError(key + ".eta_think: must be in [0,1]");
    if (!(p.weight >= 0.0 && p.weight <= 1.0))
      throw ConfigError(key + ".weight: must be in [0,1]");
    weight_sum += p.weight;
  }
  if (std::fabs(weight_sum - 1.0) > 1e-12)
    throw ConfigError("env.profiles: weights must sum to 1 (got " +
                      std::to_string(weight_sum) + ")");
  if (cfg.t_short < 2) throw ConfigError("env.t_short: must be >= 2");
  if (cfg.t_think <= cfg.t_short)
    throw ConfigError("env.t_think: must exceed t_short");
  if (cfg.vocab_answer_size < 1)
    throw ConfigError("env.answer_vocab: must be >= 1");
  if (cfg.vocab_scratch_size < 1)
    throw ConfigError("env.scratch_vocab: must be >= 1");
}

// Immutable synthetic task environment. Safe to share across rollout workers;
// each worker owns its own Rng.
class Environment {
 public:
  Environment(EnvConfig cfg, std::uint64_t seed)
      : cfg_(std::move(cfg)), seed_(seed) {
    validate(cfg_);
    assign_classes();
  }

  const EnvConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  int num_classes() const { return cfg_.num_query_classes; }
  int num_profiles() const { return static_cast<int>(cfg_.profiles.size()); }
  const DifficultyProfile& profile(int index) const {
    return cfg_.profiles[static_cast<std::size_t>(index)];
  }
  int profile_of(int class_id) const {
    return class_profile_[static_cast<std::size_t>(class_id)];
  }
  int truth_of(int class_id) const {
    return class_truth_[static_cast<std::size_t>(class_id)];
  }
  const std::vector<int>& classes_of(int profile_index) const {
    return profile_classes_[static_cast<std::size_t>(profile_index)];
  }
  int template_length(ControlToken mode) const {
    return mode == ControlToken::kShort ? cfg_.t_short : cfg_.t_think;
  }

  Query query_for_class(int class_id) const {
    return Query{class_id, profile_of(class_id), truth_of(class_id)};
  }

  // Profile drawn by weight (restricted to profiles that own classes), class
  // uniform within the profile.
  Query sample_query(Rng& rng) const {
    const int p = sampled_profiles_[static_cast<std::size_t>(
        rng.categorical(sample_weights_))];
    const auto& classes = profile_classes_[static_cast<std::size_t>(p)];
    const int k = static_cast<int>(rng.next_u64() % classes.size());
    return query_for_class(classes[static_cast<std::size_t>(k)]);
  }

  // Token at the template's final answer position, if it is an answer token.
  std::optional<int> extract_answer(const Trajectory& traj) const {
    if (traj.tokens.empty()) return std::nullopt;
    const int last = traj.tokens.back();
    if (last < 0 || last >= cfg_.vocab_answer_size) return std::nullopt;
    return last;
  }

  // Correct iff the extracted answer matches the ground truth and the
  // mode-competence flip does not fire. One uniform variate is consumed per
  // call regardless of the branch, so replaying an rng stream reproduces
  // outcomes exactly.
  bool judge(const Trajectory& traj, const Query& query, Rng& rng) const {
    const auto& prof = profile(query.profile_index);
    const double eta = traj.control == ControlToken::kShort ? prof.eta_short
                                                            : prof.eta_think;
    const bool flip = rng.bernoulli(eta);
    const auto answer = extract_answer(traj);
    return answer.has_value() && *answer == query.truth && !flip;
  }

 private:
  // Ground truth: round-robin over the answer vocabulary. Profile ownership:
  // largest-remainder quotas by weight, then classes dealt to profiles
  // round-robin (skipping profiles whose quota is filled).
  void assign_classes() {
    const int n = cfg_.num_query_classes;
    const int np = num_profiles();
    class_truth_.resize(static_cast<std::size_t>(n));
    for (int c = 0; c < n; ++c)
      class_truth_[static_cast<std::size_t>(c)] = c % cfg_.vocab_answer_size;

    std::vector<int> quota(static_cast<std::size_t>(np), 0);
    std::vector<std::pair<double, int>> remainders;
    int assigned = 0;
    for (int p = 0; p < np; ++p) {
      const double exact = cfg_.profiles[static_cast<std::size_t>(p)].weight *
                           static_cast<double>(n);
      quota[static_cast<std::size_t>(p)] = static_cast<int>(std::floor(exact));
      assigned += quota[static_cast<std::size_t>(p)];
      remainders.emplace_back(exact - std::floor(exact), p);
    }
    // Distribute the leftover classes to the largest fractional remainders;
    // ties break toward the lower profile index for determinism.
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) {
                       return a.first > b.first;
                     });
    for (int i = 0; assigned < n; ++i, ++assigned)
      quota[static_cast<std::size_t>(
          remainders[static_cast<std::size_t>(i % np)].second)]++;

    class_profile_.assign(static_cast<std::size_t>(n), 0);
    profile_classes_.assign(static_cast<std::size_t>(np), {});
    std::vector<int> filled(static_cast<std::size_t>(np), 0);
    int p = 0;
    for (int c = 0; c < n; ++c) {
      while (filled[static_cast<std::size_t>(p)] >=
             quota[static_cast<std::size_t>(p)])
        p = (p + 1) % np;
      class_profile_[static_cast<std::size_t>(c)] = p;
      profile_classes_[static_cast<std::size_t>(p)].push_back(c);
      filled[static_cast<std::size_t>(p)]++;
      p = (p + 1) % np;
    }

    for (int i = 0; i < np; ++i) {
      if (profile_classes_[static_cast<std::size_t>(i)].empty()) continue;
      sampled_profiles_.push_back(i);
      sample_weights_.push_back(
          cfg_.profiles[static_cast<std::size_t>(i)].weight);
    }
    double total = 0.0;
    for (double w : sample_weights_) total += w;
    if (total <= 0.0)
      throw ConfigError("env.profiles: no sampleable profile owns classes");
    for (double& w : sample_weights_) w /= total;
  }

  EnvConfig cfg_;
  std::uint64_t seed_;
  std::vector<int> class_profile_;
  std::vector<int> class_truth_;
  std::vector<std::vector<int>> profile_classes_;
  std::vector<int> sampled_profiles_;
  std::vector<double> sample_weights_;
};

inline Environment build_env(const EnvConfig& config, std::uint64_t seed) {
  return Environment(config, seed);
}

}  // namespace degrpo
