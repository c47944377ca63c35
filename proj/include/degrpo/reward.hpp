#pragma once

#include <span>
#include <string>
#include <vector>

#include "degrpo/errors.hpp"
#include "degrpo/types.hpp"

namespace degrpo {

struct RewardConfig {
  // Margin preferring short correct answers over think correct ones.
  double gamma = 0.1;
};

inline void validate(const RewardConfig& cfg) {
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0))
    throw ConfigError("reward.gamma: must lie strictly inside (0,1)");
}

// Three-case reward: 1 for short correct, 1 - gamma for think correct,
// -1 for any incorrect answer.
inline double compute_reward(ControlToken control, bool correct,
                             const RewardConfig& cfg) {
  if (!correct) return -1.0;
  return control == ControlToken::kShort ? 1.0 : 1.0 - cfg.gamma;
}

// Group-relative advantages: A_i = r_i - mean(r), broadcast to every token of
// trajectory i. No standard-deviation normalization.
inline std::vector<double> group_advantages(std::span<const double> rewards) {
  if (rewards.size() < 2)
    throw ConfigError("group_advantages: group size must be >= 2 (got " +
                      std::to_string(rewards.size()) + ")");
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  std::vector<double> adv(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = rewards[i] - mean;
  return adv;
}

// The G scored rollouts of one query together with their advantages.
struct GroupBatch {
  Query query;
  std::vector<Trajectory> trajectories;
  std::vector<double> advantages;
};

}  // namespace degrpo
