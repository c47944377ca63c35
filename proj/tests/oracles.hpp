// Test-only oracles, independent of the implementation paths they check.
#pragma once

#include <cmath>
#include <vector>

#include "degrpo/policy.hpp"
#include "degrpo/types.hpp"

namespace degrpo::oracles {

// Exact KL(p || q) of one context block from canonical log-probabilities.
inline double exact_block_kl(const BlockDist& p, const BlockDist& q) {
  double kl = 0.0;
  for (std::size_t v = 0; v < p.p.size(); ++v)
    kl += p.p[v] * (p.logp[v] - q.logp[v]);
  return kl;
}

// Closed-form expectation of the per-trajectory KL estimator
// (1/(T+1)) sum_t (rho_t - log rho_t - 1) under trajectories sampled from
// `params` for one query: the control token contributes its own k value
// weighted by pi(c), the response positions contribute exact conditional KLs.
inline double expected_trajectory_kl(const PolicyParams& params,
                                     const PolicyParams& ref,
                                     const Query& query) {
  const BlockDist ctrl_p =
      block_distribution(params, query.class_id, Slot::kControl);
  const BlockDist ctrl_q =
      block_distribution(ref, query.class_id, Slot::kControl);

  double expectation = 0.0;
  for (int c = 0; c < 2; ++c) {
    const ControlToken mode = static_cast<ControlToken>(c);
    const int T = params.dims.template_length(mode);
    const double rho = std::exp(ctrl_q.logp[static_cast<std::size_t>(c)] -
                                ctrl_p.logp[static_cast<std::size_t>(c)]);
    const double k_control = rho - std::log(rho) - 1.0;

    const Slot scratch = mode == ControlToken::kShort ? Slot::kShortScratch
                                                      : Slot::kThinkScratch;
    const Slot answer = mode == ControlToken::kShort ? Slot::kShortAnswer
                                                     : Slot::kThinkAnswer;
    const double kl_scratch =
        exact_block_kl(block_distribution(params, query.class_id, scratch),
                       block_distribution(ref, query.class_id, scratch));
    const double kl_answer =
        exact_block_kl(block_distribution(params, query.class_id, answer),
                       block_distribution(ref, query.class_id, answer));

    expectation += ctrl_p.p[static_cast<std::size_t>(c)] / (T + 1) *
                   (k_control + (T - 1) * kl_scratch + kl_answer);
  }
  return expectation;
}

// Builds a trajectory whose logp entries are recorded under `sampling_params`,
// with an arbitrary response length (templates are not consulted).
inline Trajectory make_trajectory(const PolicyParams& sampling_params,
                                  const Query& query, ControlToken mode,
                                  const std::vector<int>& tokens) {
  Trajectory traj;
  traj.query = query;
  traj.control = mode;
  traj.tokens = tokens;
  const int T = static_cast<int>(tokens.size());
  const PolicyTable table(sampling_params);
  traj.logp.push_back(
      table.logp({query.class_id, Slot::kControl}, static_cast<int>(mode)));
  for (int t = 1; t <= T; ++t) {
    const Slot slot = slot_at(mode, t, T);
    const int local = local_token(sampling_params.dims, slot,
                                  tokens[static_cast<std::size_t>(t - 1)]);
    traj.logp.push_back(table.logp({query.class_id, slot}, local));
  }
  return traj;
}

}  // namespace degrpo::oracles
