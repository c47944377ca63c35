#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "degrpo/env.hpp"
#include "degrpo/errors.hpp"
#include "degrpo/rng.hpp"
#include "degrpo/types.hpp"

namespace degrpo {

// Logits are clamped to this range before every softmax; probabilities stay
// within ~1e-13 of saturation while exp() cannot overflow.
inline constexpr double kLogitCap = 30.0;

// One weight block per (query class, slot). Response slots are
// mode-conditioned: the short and think templates carry their own scratch and
// answer distributions, so response quality in one mode can only be learned
// from rollouts of that mode.
enum class Slot : int {
  kControl = 0,
  kShortScratch = 1,
  kShortAnswer = 2,
  kThinkScratch = 3,
  kThinkAnswer = 4,
};
inline constexpr int kNumSlots = 5;

struct PolicyDims {
  int classes = 0;
  int answer_vocab = 0;
  int scratch_vocab = 0;
  int t_short = 0;
  int t_think = 0;

  int slot_size(Slot slot) const {
    switch (slot) {
      case Slot::kControl:
        return 2;
      case Slot::kShortScratch:
      case Slot::kThinkScratch:
        return scratch_vocab;
      default:
        return answer_vocab;
    }
  }
  int slot_offset(Slot slot) const {
    switch (slot) {
      case Slot::kControl:
        return 0;
      case Slot::kShortScratch:
        return 2;
      case Slot::kShortAnswer:
        return 2 + scratch_vocab;
      case Slot::kThinkScratch:
        return 2 + scratch_vocab + answer_vocab;
      default:
        return 2 + 2 * scratch_vocab + answer_vocab;
    }
  }
  int per_class() const { return 2 + 2 * scratch_vocab + 2 * answer_vocab; }
  int dim() const { return classes * per_class(); }
  int index(int class_id, Slot slot, int local_token) const {
    return class_id * per_class() + slot_offset(slot) + local_token;
  }
  int template_length(ControlToken mode) const {
    return mode == ControlToken::kShort ? t_short : t_think;
  }

  bool operator==(const PolicyDims&) const = default;
};

inline PolicyDims dims_for(const Environment& env) {
  const auto& cfg = env.config();
  return PolicyDims{cfg.num_query_classes, cfg.vocab_answer_size,
                    cfg.vocab_scratch_size, cfg.t_short, cfg.t_think};
}

struct PolicyParams {
  PolicyDims dims;
  std::vector<double> theta;

  static PolicyParams zeros(const PolicyDims& dims) {
    return PolicyParams{dims,
                        std::vector<double>(static_cast<std::size_t>(dims.dim()),
                                            0.0)};
  }
};

// Deep copy serving as pi_old / pi_ref; later steps on the live params leave
// it untouched (value semantics).
inline PolicyParams snapshot(const PolicyParams& params) { return params; }

// A (class, slot) pair fully identifies a softmax context.
struct Context {
  int class_id;
  Slot slot;
};

// Slot and local-token-id resolution for full-sequence position t in [0, T],
// where t = 0 is the control token and t = T the answer position.
inline Slot slot_at(ControlToken mode, int t, int response_length) {
  if (t == 0) return Slot::kControl;
  if (mode == ControlToken::kShort)
    return t == response_length ? Slot::kShortAnswer : Slot::kShortScratch;
  return t == response_length ? Slot::kThinkAnswer : Slot::kThinkScratch;
}

inline int local_token(const PolicyDims& dims, Slot slot, int global_token) {
  switch (slot) {
    case Slot::kControl:
    case Slot::kShortAnswer:
    case Slot::kThinkAnswer:
      return global_token;
    default:
      return global_token - dims.answer_vocab;
  }
}

inline int global_token(const PolicyDims& dims, Slot slot, int local) {
  switch (slot) {
    case Slot::kControl:
    case Slot::kShortAnswer:
    case Slot::kThinkAnswer:
      return local;
    default:
      return local + dims.answer_vocab;
  }
}

// Normalized probabilities and log-probabilities of one context. logp is
// log(p) of the canonical normalized probability, so the two views are
// bit-consistent.
struct BlockDist {
  std::vector<double> p;
  std::vector<double> logp;
};

inline BlockDist block_distribution(const PolicyParams& params, int class_id,
                                    Slot slot) {
  const int size = params.dims.slot_size(slot);
  const int base = params.dims.index(class_id, slot, 0);
  BlockDist dist;
  dist.p.resize(static_cast<std::size_t>(size));
  dist.logp.resize(static_cast<std::size_t>(size));
  double max_logit = -kLogitCap;
  for (int v = 0; v < size; ++v) {
    const double z = std::clamp(params.theta[static_cast<std::size_t>(base + v)],
                                -kLogitCap, kLogitCap);
    dist.p[static_cast<std::size_t>(v)] = z;
    max_logit = std::max(max_logit, z);
  }
  double sum = 0.0;
  for (int v = 0; v < size; ++v) {
    const double e = std::exp(dist.p[static_cast<std::size_t>(v)] - max_logit);
    dist.p[static_cast<std::size_t>(v)] = e;
    sum += e;
  }
  for (int v = 0; v < size; ++v) {
    dist.p[static_cast<std::size_t>(v)] /= sum;
    dist.logp[static_cast<std::size_t>(v)] =
        std::log(dist.p[static_cast<std::size_t>(v)]);
  }
  return dist;
}

// Cached block distributions for a fixed parameter vector. Shares the exact
// computation path of block_distribution, so cached and direct evaluation are
// bit-identical.
class PolicyTable {
 public:
  explicit PolicyTable(const PolicyParams& params) : dims_(params.dims) {
    blocks_.reserve(static_cast<std::size_t>(dims_.classes * kNumSlots));
    for (int c = 0; c < dims_.classes; ++c)
      for (int s = 0; s < kNumSlots; ++s)
        blocks_.push_back(block_distribution(params, c, static_cast<Slot>(s)));
  }

  const BlockDist& block(int class_id, Slot slot) const {
    return blocks_[static_cast<std::size_t>(class_id * kNumSlots +
                                            static_cast<int>(slot))];
  }
  const PolicyDims& dims() const { return dims_; }

  double logp(const Context& ctx, int local) const {
    return block(ctx.class_id, ctx.slot).logp[static_cast<std::size_t>(local)];
  }

 private:
  PolicyDims dims_;
  std::vector<BlockDist> blocks_;
};

// pi(c | x) as (P(short), P(think)).
inline std::array<double, 2> control_distribution(const PolicyParams& params,
                                                  const Query& query) {
  const BlockDist d = block_distribution(params, query.class_id, Slot::kControl);
  return {d.p[0], d.p[1]};
}

// pi(a_t | x, c) over the vocabulary of response position `position` in
// [0, T): scratch everywhere except the final answer position.
inline std::vector<double> token_distribution(const PolicyParams& params,
                                              const Query& query,
                                              ControlToken mode, int position) {
  const int T = params.dims.template_length(mode);
  if (position < 0 || position >= T)
    throw UsageError("token_distribution: position " + std::to_string(position) +
                     " outside template of length " + std::to_string(T));
  const Slot slot = slot_at(mode, position + 1, T);
  return block_distribution(params, query.class_id, slot).p;
}

// Balanced warm start: control logits zero (P(think)=1/2); per-profile answer
// logits solved so the true answer token has probability p0 in each mode;
// scratch logits zero (uniform).
inline PolicyParams warmup_init(const Environment& env,
                                std::span<const double> p0_short,
                                std::span<const double> p0_think) {
  const auto np = static_cast<std::size_t>(env.num_profiles());
  if (p0_short.size() != np || p0_think.size() != np)
    throw ConfigError("warmup: p0 arrays must have one entry per profile");
  for (std::size_t i = 0; i < np; ++i) {
    if (!(p0_short[i] > 0.0 && p0_short[i] < 1.0) ||
        !(p0_think[i] > 0.0 && p0_think[i] < 1.0))
      throw ConfigError("warmup: p0 must lie strictly inside (0,1)");
  }
  const int A = env.config().vocab_answer_size;
  if (A < 2) throw ConfigError("warmup: answer_vocab must be >= 2");

  PolicyParams params = PolicyParams::zeros(dims_for(env));
  for (int c = 0; c < env.num_classes(); ++c) {
    const auto prof = static_cast<std::size_t>(env.profile_of(c));
    const int truth = env.truth_of(c);
    const double logit_short =
        std::log(p0_short[prof] * (A - 1) / (1.0 - p0_short[prof]));
    const double logit_think =
        std::log(p0_think[prof] * (A - 1) / (1.0 - p0_think[prof]));
    params.theta[static_cast<std::size_t>(
        params.dims.index(c, Slot::kShortAnswer, truth))] = logit_short;
    params.theta[static_cast<std::size_t>(
        params.dims.index(c, Slot::kThinkAnswer, truth))] = logit_think;
  }
  return params;
}

// grad_theta log pi(token | context) for full-sequence position t in [0, T].
// Nonzero only on the context's block: (1[v = token] - pi(v)) per coordinate,
// zeroed where the logit cap is active.
struct SparseGrad {
  int offset = 0;
  std::vector<double> values;
};

inline SparseGrad grad_logprob(const PolicyParams& params, const Query& query,
                               ControlToken mode, int position,
                               int global_tok) {
  const int T = params.dims.template_length(mode);
  if (position < 0 || position > T)
    throw UsageError("grad_logprob: position out of range");
  const Slot slot = slot_at(mode, position, T);
  const int local = local_token(params.dims, slot, global_tok);
  const int size = params.dims.slot_size(slot);
  if (local < 0 || local >= size)
    throw UsageError("grad_logprob: token outside the position's vocabulary");
  const BlockDist dist = block_distribution(params, query.class_id, slot);
  SparseGrad grad;
  grad.offset = params.dims.index(query.class_id, slot, 0);
  grad.values.resize(static_cast<std::size_t>(size));
  for (int v = 0; v < size; ++v) {
    const double theta_v =
        params.theta[static_cast<std::size_t>(grad.offset + v)];
    const double cap_factor =
        (theta_v > -kLogitCap && theta_v < kLogitCap) ? 1.0 : 0.0;
    grad.values[static_cast<std::size_t>(v)] =
        ((v == local ? 1.0 : 0.0) - dist.p[static_cast<std::size_t>(v)]) *
        cap_factor;
  }
  return grad;
}

// Samples control then the T response tokens, recording the log-probability
// of every sampled token under `params`.
inline Trajectory sample_trajectory(const PolicyParams& params,
                                    const Query& query, Rng& rng) {
  Trajectory traj;
  traj.query = query;

  const BlockDist ctrl =
      block_distribution(params, query.class_id, Slot::kControl);
  const int c = rng.categorical(ctrl.p);
  traj.control = static_cast<ControlToken>(c);
  traj.logp.push_back(ctrl.logp[static_cast<std::size_t>(c)]);

  const int T = params.dims.template_length(traj.control);
  traj.tokens.reserve(static_cast<std::size_t>(T));
  for (int t = 1; t <= T; ++t) {
    const Slot slot = slot_at(traj.control, t, T);
    const BlockDist dist = block_distribution(params, query.class_id, slot);
    const int local = rng.categorical(dist.p);
    traj.tokens.push_back(global_token(params.dims, slot, local));
    traj.logp.push_back(dist.logp[static_cast<std::size_t>(local)]);
  }
  return traj;
}

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace degrpo
