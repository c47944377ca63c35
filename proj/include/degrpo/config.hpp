#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "degrpo/env.hpp"
#include "degrpo/errors.hpp"
#include "degrpo/objective.hpp"
#include "degrpo/trainer.hpp"

namespace degrpo {

using Json = nlohmann::ordered_json;

// Warm-start targets: probability of the true answer token, one entry per
// difficulty profile and mode.
struct WarmupConfig {
  std::vector<double> p0_short;
  std::vector<double> p0_think;
};

struct RunConfig {
  EnvConfig env;
  WarmupConfig warmup;
  TrainConfig train;
  std::string preset;
  std::string output_dir;
};

inline void validate(const RunConfig& cfg) {
  validate(cfg.env);
  validate(cfg.train);
  const std::size_t np = cfg.env.profiles.size();
  if (cfg.warmup.p0_short.size() != np || cfg.warmup.p0_think.size() != np)
    throw ConfigError("warmup: p0 arrays must have one entry per profile");
  for (std::size_t i = 0; i < np; ++i) {
    if (!(cfg.warmup.p0_short[i] > 0.0 && cfg.warmup.p0_short[i] < 1.0))
      throw ConfigError("env.profiles[" + std::to_string(i) +
                        "].p0_short: must lie strictly inside (0,1)");
    if (!(cfg.warmup.p0_think[i] > 0.0 && cfg.warmup.p0_think[i] < 1.0))
      throw ConfigError("env.profiles[" + std::to_string(i) +
                        "].p0_think: must lie strictly inside (0,1)");
  }
}

// ---------------------------------------------------------------------------
// JSON (de)serialization
// ---------------------------------------------------------------------------

namespace config_detail {

template <typename T>
T require(const Json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + "." + key + ": missing");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

template <typename T>
T get_or(const Json& j, const std::string& key, T fallback,
         const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

}  // namespace config_detail

inline Variant variant_from_string(const std::string& name) {
  if (name == "vanilla_grpo" || name == "vanilla") return Variant::kVanillaGrpo;
  if (name == "degrpo") return Variant::kDegrpo;
  throw ConfigError("objective.variant: unknown variant '" + name +
                    "' (expected vanilla_grpo or degrpo)");
}

inline Json to_json(const RunConfig& cfg) {
  Json profiles = Json::array();
  for (std::size_t i = 0; i < cfg.env.profiles.size(); ++i) {
    const auto& p = cfg.env.profiles[i];
    Json jp;
    jp["name"] = p.name;
    jp["eta_short"] = p.eta_short;
    jp["eta_think"] = p.eta_think;
    jp["weight"] = p.weight;
    jp["p0_short"] = cfg.warmup.p0_short[i];
    jp["p0_think"] = cfg.warmup.p0_think[i];
    profiles.push_back(jp);
  }
  Json j;
  j["env"] = {{"classes", cfg.env.num_query_classes},
              {"profiles", profiles},
              {"t_short", cfg.env.t_short},
              {"t_think", cfg.env.t_think},
              {"answer_vocab", cfg.env.vocab_answer_size},
              {"scratch_vocab", cfg.env.vocab_scratch_size},
              {"seed", cfg.env.seed}};
  j["train"] = {{"steps", cfg.train.steps},
                {"batch_queries", cfg.train.batch_queries},
                {"group_size", cfg.train.group_size},
                {"inner_epochs", cfg.train.inner_epochs},
                {"learning_rate", cfg.train.learning_rate},
                {"adam_beta1", cfg.train.adam_beta1},
                {"adam_beta2", cfg.train.adam_beta2},
                {"weight_decay", cfg.train.weight_decay},
                {"seed", cfg.train.seed},
                {"objective",
                 {{"variant", to_string(cfg.train.objective.variant)},
                  {"epsilon", cfg.train.objective.epsilon},
                  {"beta", cfg.train.objective.beta},
                  {"alpha", cfg.train.objective.alpha}}},
                {"reward", {{"gamma", cfg.train.reward.gamma}}}};
  if (!cfg.preset.empty()) j["preset"] = cfg.preset;
  if (!cfg.output_dir.empty()) j["output_dir"] = cfg.output_dir;
  return j;
}

inline RunConfig run_config_from_json(const Json& j) {
  using config_detail::get_or;
  using config_detail::require;
  RunConfig cfg;

  if (!j.contains("env")) throw ConfigError("env: missing section");
  const Json& je = j.at("env");
  cfg.env.num_query_classes = require<int>(je, "classes", "env");
  if (!je.contains("profiles") || !je.at("profiles").is_array())
    throw ConfigError("env.profiles: missing array");
  for (std::size_t i = 0; i < je.at("profiles").size(); ++i) {
    const Json& jp = je.at("profiles").at(i);
    const std::string where = "env.profiles[" + std::to_string(i) + "]";
    DifficultyProfile profile;
    profile.name = require<std::string>(jp, "name", where);
    profile.eta_short = require<double>(jp, "eta_short", where);
    profile.eta_think = require<double>(jp, "eta_think", where);
    profile.weight = require<double>(jp, "weight", where);
    cfg.env.profiles.push_back(profile);
    cfg.warmup.p0_short.push_back(get_or<double>(jp, "p0_short", 0.35, where));
    cfg.warmup.p0_think.push_back(get_or<double>(jp, "p0_think", 0.35, where));
  }
  cfg.env.t_short = get_or<int>(je, "t_short", 2, "env");
  cfg.env.t_think = get_or<int>(je, "t_think", 50, "env");
  cfg.env.vocab_answer_size = get_or<int>(je, "answer_vocab", 10, "env");
  cfg.env.vocab_scratch_size = get_or<int>(je, "scratch_vocab", 8, "env");
  cfg.env.seed = get_or<std::uint64_t>(je, "seed", 0, "env");

  if (!j.contains("train")) throw ConfigError("train: missing section");
  const Json& jt = j.at("train");
  cfg.train.steps = require<int>(jt, "steps", "train");
  cfg.train.batch_queries = get_or<int>(jt, "batch_queries", 64, "train");
  cfg.train.group_size = get_or<int>(jt, "group_size", 8, "train");
  cfg.train.inner_epochs = get_or<int>(jt, "inner_epochs", 4, "train");
  cfg.train.learning_rate = get_or<double>(jt, "learning_rate", 5e-3, "train");
  cfg.train.adam_beta1 = get_or<double>(jt, "adam_beta1", 0.9, "train");
  cfg.train.adam_beta2 = get_or<double>(jt, "adam_beta2", 0.999, "train");
  cfg.train.weight_decay = get_or<double>(jt, "weight_decay", 0.0, "train");
  cfg.train.seed = get_or<std::uint64_t>(jt, "seed", 0, "train");
  if (jt.contains("objective")) {
    const Json& jo = jt.at("objective");
    cfg.train.objective.variant = variant_from_string(
        get_or<std::string>(jo, "variant", "degrpo", "train.objective"));
    cfg.train.objective.epsilon =
        get_or<double>(jo, "epsilon", 0.2, "train.objective");
    cfg.train.objective.beta =
        get_or<double>(jo, "beta", 1e-3, "train.objective");
    cfg.train.objective.alpha =
        get_or<double>(jo, "alpha", 1e-3, "train.objective");
  }
  if (jt.contains("reward"))
    cfg.train.reward.gamma =
        get_or<double>(jt.at("reward"), "gamma", 0.1, "train.reward");

  cfg.preset = get_or<std::string>(j, "preset", "", "");
  cfg.output_dir = get_or<std::string>(j, "output_dir", "", "");
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

// ---------------------------------------------------------------------------
// Presets: one-command reproductions of the three training phenomena.
// ---------------------------------------------------------------------------

namespace preset_detail {

inline void add_profile(RunConfig& cfg, const std::string& name,
                        double eta_short, double eta_think, double weight,
                        double p0_short, double p0_think) {
  cfg.env.profiles.push_back({name, eta_short, eta_think, weight});
  cfg.warmup.p0_short.push_back(p0_short);
  cfg.warmup.p0_think.push_back(p0_think);
}

inline RunConfig base_config() {
  RunConfig cfg;
  cfg.env.num_query_classes = 30;
  cfg.env.t_short = 2;
  cfg.env.t_think = 50;
  cfg.env.vocab_answer_size = 10;
  cfg.env.vocab_scratch_size = 8;
  cfg.env.seed = 1234;
  cfg.train.steps = 300;
  cfg.train.batch_queries = 64;
  cfg.train.group_size = 8;
  cfg.train.inner_epochs = 4;
  cfg.train.learning_rate = 5e-3;
  cfg.train.seed = 0;
  cfg.train.objective.epsilon = 0.2;
  cfg.train.objective.beta = 1e-3;
  cfg.train.objective.alpha = 1e-3;
  cfg.train.reward.gamma = 0.1;
  return cfg;
}

}  // namespace preset_detail

// Mode collapse under vanilla normalization: a homogeneous environment with a
// mild short preference, so the control updates (dominated by the short
// trajectories' 1/(T_short+1) weight) commit one mode out of the rollouts
// within roughly a hundred steps. The same configuration under the decoupled
// objective keeps both modes in play, which is what `compare` checks.
inline RunConfig preset_vanilla_collapse() {
  RunConfig cfg = preset_detail::base_config();
  cfg.preset = "vanilla-collapse";
  cfg.train.objective.variant = Variant::kVanillaGrpo;
  cfg.train.steps = 300;
  cfg.train.learning_rate = 1e-2;
  cfg.train.objective.beta = 3e-3;
  cfg.train.reward.gamma = 0.25;
  preset_detail::add_profile(cfg, "easy", 0.0, 0.0, 1.0, 0.85, 0.85);
  return cfg;
}

// The U-shaped mode-selection curve and difficulty-stratified final policy
// under the decoupled objective on a mixed-difficulty environment. The softer
// KL coefficient lets easy classes commit to the short mode by the end of the
// run; hard classes start with a slightly stronger warm answer distribution
// so the early think preference shows up quickly.
inline RunConfig preset_degrpo_ucurve() {
  RunConfig cfg = preset_detail::base_config();
  cfg.preset = "degrpo-ucurve";
  cfg.train.objective.variant = Variant::kDegrpo;
  cfg.train.steps = 600;
  cfg.train.objective.beta = 3e-4;
  cfg.train.reward.gamma = 0.12;
  preset_detail::add_profile(cfg, "easy", 0.0, 0.0, 1.0 / 3, 0.3, 0.3);
  preset_detail::add_profile(cfg, "medium", 0.3, 0.05, 1.0 / 3, 0.45, 0.45);
  preset_detail::add_profile(cfg, "hard", 0.8, 0.1, 1.0 / 3, 0.45, 0.45);
  return cfg;
}

// Control-token weight sweep: an easy-leaning environment where all-correct
// short groups are reachable, exposing how alpha governs the speed of mode
// selection. beta sits between the two swept alphas so the small-alpha arm
// still commits within the horizon, just visibly later.
inline RunConfig preset_alpha_sweep() {
  RunConfig cfg = preset_detail::base_config();
  cfg.preset = "alpha-sweep";
  cfg.train.objective.variant = Variant::kDegrpo;
  cfg.train.steps = 600;
  cfg.train.objective.beta = 4e-4;
  preset_detail::add_profile(cfg, "easy", 0.0, 0.0, 0.6, 0.5, 0.5);
  preset_detail::add_profile(cfg, "medium", 0.3, 0.05, 0.2, 0.5, 0.5);
  preset_detail::add_profile(cfg, "hard", 0.8, 0.1, 0.2, 0.5, 0.5);
  return cfg;
}

inline RunConfig make_preset(const std::string& name) {
  if (name == "vanilla-collapse") return preset_vanilla_collapse();
  if (name == "degrpo-ucurve") return preset_degrpo_ucurve();
  if (name == "alpha-sweep") return preset_alpha_sweep();
  throw ConfigError("unknown preset '" + name +
                    "' (expected vanilla-collapse, degrpo-ucurve or "
                    "alpha-sweep)");
}

}  // namespace degrpo
