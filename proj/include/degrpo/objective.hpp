#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "degrpo/errors.hpp"
#include "degrpo/policy.hpp"
#include "degrpo/reward.hpp"

namespace degrpo {

enum class Variant { kVanillaGrpo, kDegrpo };

inline const char* to_string(Variant v) {
  return v == Variant::kVanillaGrpo ? "vanilla_grpo" : "degrpo";
}

struct ObjectiveConfig {
  Variant variant = Variant::kDegrpo;
  double epsilon = 0.2;  // clip width
  double beta = 1e-3;    // KL coefficient
  double alpha = 1e-3;   // control-token weight (DeGRPO only)
};

inline void validate(const ObjectiveConfig& cfg) {
  if (!(cfg.epsilon > 0.0)) throw ConfigError("objective.epsilon: must be > 0");
  if (!(cfg.beta >= 0.0)) throw ConfigError("objective.beta: must be >= 0");
  if (!(cfg.alpha > 0.0)) throw ConfigError("objective.alpha: must be > 0");
}

struct ObjectiveReport {
  double value = 0.0;
  std::vector<double> gradient;
  double control_term = 0.0;   // mean over trajectories
  double response_term = 0.0;  // mean over trajectories
  double kl_term = 0.0;        // mean KL estimate, unweighted by beta
};

// Token-level clipped surrogate:
// min(ratio * A, clip(ratio, 1-eps, 1+eps) * A).
inline double token_surrogate(double ratio, double advantage, double epsilon) {
  const double clipped =
      std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon) * advantage;
  return std::min(ratio * advantage, clipped);
}

namespace detail {

// Gradient flows only when the unclipped branch attains the min; ties go to
// the unclipped branch (measure-zero kink).
inline bool surrogate_unclipped(double ratio, double advantage,
                                double epsilon) {
  const double clipped =
      std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon) * advantage;
  return ratio * advantage <= clipped;
}

// k = rho - log(rho) - 1 for rho = exp(d), evaluated as expm1(d) - d so the
// result is nonnegative even for d near 0.
inline double kl_token(double d) { return std::expm1(d) - d; }

inline void accumulate_block(std::vector<double>& grad, double coeff,
                             const PolicyParams& params, int class_id,
                             Slot slot, int local,
                             const BlockDist& dist) {
  const int base = params.dims.index(class_id, slot, 0);
  const int size = params.dims.slot_size(slot);
  for (int v = 0; v < size; ++v) {
    const double theta_v = params.theta[static_cast<std::size_t>(base + v)];
    if (theta_v <= -kLogitCap || theta_v >= kLogitCap) continue;
    grad[static_cast<std::size_t>(base + v)] +=
        coeff *
        ((v == local ? 1.0 : 0.0) - dist.p[static_cast<std::size_t>(v)]);
  }
}

struct TrajectoryTerms {
  double control = 0.0;
  double response = 0.0;
  double kl = 0.0;
};

// Per-trajectory fold shared by both objective variants and by the
// decomposition. Gradient accumulation is optional (grad == nullptr skips it).
inline TrajectoryTerms trajectory_terms(
    const Trajectory& traj, double advantage, const PolicyParams& params,
    const PolicyTable& table, const PolicyTable& old_table,
    const PolicyTable* ref_table, const ObjectiveConfig& cfg,
    double traj_weight, std::vector<double>* grad) {
  const int T = traj.response_length();
  if (static_cast<int>(traj.logp.size()) != T + 1)
    throw IntegrityError("trajectory logp length does not match its tokens");

  const double control_weight =
      cfg.variant == Variant::kVanillaGrpo ? 1.0 / (T + 1) : cfg.alpha;
  const double response_weight =
      cfg.variant == Variant::kVanillaGrpo ? 1.0 / (T + 1) : 1.0 / T;
  const double kl_weight = 1.0 / (T + 1);

  TrajectoryTerms terms;
  for (int t = 0; t <= T; ++t) {
    const Slot slot = slot_at(traj.control, t, T);
    const int global =
        t == 0 ? static_cast<int>(traj.control) : traj.tokens[t - 1];
    const int local = local_token(params.dims, slot, global);
    const Context ctx{traj.query.class_id, slot};

    const double logp_old = old_table.logp(ctx, local);
    if (std::fabs(logp_old - traj.logp[static_cast<std::size_t>(t)]) > 1e-9)
      throw IntegrityError(
          "trajectory was not sampled under the supplied old-policy snapshot "
          "(logp mismatch at position " +
          std::to_string(t) + ")");

    const double logp_new = table.logp(ctx, local);
    const double ratio =
        std::exp(logp_new - traj.logp[static_cast<std::size_t>(t)]);
    const double weight = t == 0 ? control_weight : response_weight;
    const double surrogate = token_surrogate(ratio, advantage, cfg.epsilon);
    (t == 0 ? terms.control : terms.response) += weight * surrogate;

    double coeff = 0.0;
    if (surrogate_unclipped(ratio, advantage, cfg.epsilon))
      coeff += weight * ratio * advantage;

    if (ref_table != nullptr) {
      const double d = ref_table->logp(ctx, local) - logp_new;
      terms.kl += kl_weight * kl_token(d);
      if (cfg.beta > 0.0) coeff -= cfg.beta * kl_weight * (1.0 - std::exp(d));
    }

    if (grad != nullptr && coeff != 0.0)
      accumulate_block(*grad, traj_weight * coeff, params,
                       traj.query.class_id, slot, local,
                       table.block(traj.query.class_id, slot));
  }
  return terms;
}

inline ObjectiveReport evaluate_objective(std::span<const GroupBatch> groups,
                                          const PolicyParams& params,
                                          const PolicyParams& old,
                                          const PolicyParams& ref,
                                          const ObjectiveConfig& cfg,
                                          bool with_gradient) {
  validate(cfg);
  if (params.dims != old.dims || params.dims != ref.dims)
    throw UsageError("objective: params, old and ref must share dimensions");

  std::size_t total = 0;
  for (const auto& g : groups) total += g.trajectories.size();
  if (total == 0) throw UsageError("objective: empty batch");

  const PolicyTable table(params);
  const PolicyTable old_table(old);
  const PolicyTable ref_table(ref);

  ObjectiveReport report;
  if (with_gradient)
    report.gradient.assign(static_cast<std::size_t>(params.dims.dim()), 0.0);
  const double traj_weight = 1.0 / static_cast<double>(total);

  for (const auto& group : groups) {
    if (group.advantages.size() != group.trajectories.size())
      throw UsageError("objective: group advantages not aligned");
    for (std::size_t i = 0; i < group.trajectories.size(); ++i) {
      const TrajectoryTerms terms = trajectory_terms(
          group.trajectories[i], group.advantages[i], params, table, old_table,
          &ref_table, cfg, traj_weight,
          with_gradient ? &report.gradient : nullptr);
      report.control_term += terms.control;
      report.response_term += terms.response;
      report.kl_term += terms.kl;
    }
  }
  report.control_term *= traj_weight;
  report.response_term *= traj_weight;
  report.kl_term *= traj_weight;
  report.value =
      report.control_term + report.response_term - cfg.beta * report.kl_term;
  return report;
}

}  // namespace detail

// Vanilla GRPO: every token of trajectory i weighted 1/(T_i + 1), minus
// beta * KL against the reference policy.
inline ObjectiveReport grpo_objective(std::span<const GroupBatch> groups,
                                      const PolicyParams& params,
                                      const PolicyParams& old,
                                      const PolicyParams& ref,
                                      const ObjectiveConfig& cfg,
                                      bool with_gradient = true) {
  if (cfg.variant != Variant::kVanillaGrpo)
    throw UsageError("grpo_objective: cfg.variant must be VANILLA_GRPO");
  return detail::evaluate_objective(groups, params, old, ref, cfg,
                                    with_gradient);
}

// DeGRPO: control token weighted by the length-independent alpha, response
// tokens normalized by 1/T_i; KL term unchanged.
inline ObjectiveReport degrpo_objective(std::span<const GroupBatch> groups,
                                        const PolicyParams& params,
                                        const PolicyParams& old,
                                        const PolicyParams& ref,
                                        const ObjectiveConfig& cfg,
                                        bool with_gradient = true) {
  if (cfg.variant != Variant::kDegrpo)
    throw UsageError("degrpo_objective: cfg.variant must be DEGRPO");
  return detail::evaluate_objective(groups, params, old, ref, cfg,
                                    with_gradient);
}

inline ObjectiveReport objective(std::span<const GroupBatch> groups,
                                 const PolicyParams& params,
                                 const PolicyParams& old,
                                 const PolicyParams& ref,
                                 const ObjectiveConfig& cfg,
                                 bool with_gradient = true) {
  return detail::evaluate_objective(groups, params, old, ref, cfg,
                                    with_gradient);
}

// Splits one trajectory's vanilla inner term into its control-token and
// response-token parts. Their sum is the 1/(T+1)-normalized token sum by
// construction.
inline std::pair<double, double> decompose_trajectory_loss(
    const Trajectory& traj, double advantage, const PolicyParams& params,
    const PolicyParams& old, const ObjectiveConfig& cfg) {
  if (cfg.variant != Variant::kVanillaGrpo)
    throw UsageError("decompose_trajectory_loss: vanilla normalization only");
  const PolicyTable table(params);
  const PolicyTable old_table(old);
  const detail::TrajectoryTerms terms = detail::trajectory_terms(
      traj, advantage, params, table, old_table, nullptr, cfg, 1.0, nullptr);
  return {terms.control, terms.response};
}

// Per-token KL estimator against a frozen reference, averaged over the T+1
// tokens: k_t = rho_t - log(rho_t) - 1 with rho_t = pi_ref / pi_theta.
// Returns the value and its gradient in theta.
inline std::pair<double, std::vector<double>> kl_penalty(
    const PolicyParams& params, const PolicyParams& ref,
    const Trajectory& traj) {
  if (params.dims != ref.dims)
    throw UsageError("kl_penalty: params and ref must share dimensions");
  const PolicyTable table(params);
  const PolicyTable ref_table(ref);
  const int T = traj.response_length();
  const double w = 1.0 / (T + 1);

  double value = 0.0;
  std::vector<double> grad(static_cast<std::size_t>(params.dims.dim()), 0.0);
  for (int t = 0; t <= T; ++t) {
    const Slot slot = slot_at(traj.control, t, T);
    const int global =
        t == 0 ? static_cast<int>(traj.control) : traj.tokens[t - 1];
    const int local = local_token(params.dims, slot, global);
    const Context ctx{traj.query.class_id, slot};
    const double d = ref_table.logp(ctx, local) - table.logp(ctx, local);
    value += w * detail::kl_token(d);
    detail::accumulate_block(grad, w * (1.0 - std::exp(d)), params,
                             traj.query.class_id, slot, local,
                             table.block(traj.query.class_id, slot));
  }
  return {value, std::move(grad)};
}

}  // namespace degrpo
