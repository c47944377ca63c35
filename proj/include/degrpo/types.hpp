#pragma once

#include <vector>

namespace degrpo {

// First generated token of every trajectory; selects the response template.
enum class ControlToken : int { kShort = 0, kThink = 1 };

inline const char* to_string(ControlToken c) {
  return c == ControlToken::kShort ? "short" : "think";
}

// One synthetic task instance. `truth` is an answer-token id, fixed per class
// at environment construction.
struct Query {
  int class_id = 0;
  int profile_index = 0;
  int truth = 0;
};

// Control token plus a fixed-length response. Token ids share one space:
// answer tokens occupy [0, answer_vocab), scratch tokens
// [answer_vocab, answer_vocab + scratch_vocab). `logp` holds per-token
// log-probabilities under the sampling policy, index 0 being the control
// token. `reward` is meaningful only after scoring.
struct Trajectory {
  Query query;
  ControlToken control = ControlToken::kShort;
  std::vector<int> tokens;
  std::vector<double> logp;
  bool correct = false;
  double reward = 0.0;

  int response_length() const { return static_cast<int>(tokens.size()); }
};

}  // namespace degrpo
