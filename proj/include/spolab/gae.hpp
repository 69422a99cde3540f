#pragma once

#include <optional>
#include <vector>

#include "spolab/errors.hpp"
#include "spolab/policy.hpp"

namespace spolab::gae {

/// One collected step as the learner sees it.
struct RolloutStep {
  std::vector<double> state;
  policy::Action action;
  double reward = 0.0;
  bool done = false;       // terminal: no bootstrap
  bool truncated = false;  // time limit: bootstrap from truncation_value
  double value = 0.0;      // V_old(s_t)
  double log_prob = 0.0;   // log pi_old(a_t|s_t)
  double truncation_value = 0.0;  // V_old(final observation), used only when truncated
};

/// Contiguous steps of one worker. bootstrap_value is V_old of the state after
/// the final step (0 if that step ended an episode).
struct RolloutBatch {
  std::vector<RolloutStep> steps;
  double bootstrap_value = 0.0;
  std::optional<std::vector<double>> advantages;
  std::optional<std::vector<double>> returns;

  std::size_t size() const { return steps.size(); }
};

/// Backward recursion A_t = delta_t + gamma*lambda*(1 - end_t)*A_{t+1}, where
/// an episode end (done or truncated) cuts the accumulation. Terminal steps do
/// not bootstrap; truncated steps bootstrap from their truncation_value.
inline std::vector<double> compute_gae(const RolloutBatch& batch, double gamma, double lambda) {
  if (batch.steps.empty()) throw EmptyBatchError("compute_gae on an empty batch");
  if (gamma < 0.0 || gamma > 1.0 || lambda < 0.0 || lambda > 1.0)
    throw ConfigError("gamma and lambda must lie in [0, 1]");
  const std::size_t n = batch.steps.size();
  std::vector<double> adv(n);
  double running = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const RolloutStep& s = batch.steps[t];
    double next_value;
    bool cut;
    if (s.done) {
      next_value = 0.0;
      cut = true;
    } else if (s.truncated) {
      next_value = s.truncation_value;
      cut = true;
    } else {
      next_value = (t + 1 < n) ? batch.steps[t + 1].value : batch.bootstrap_value;
      cut = false;
    }
    const double delta = s.reward + gamma * next_value - s.value;
    running = delta + (cut ? 0.0 : gamma * lambda * running);
    adv[t] = running;
  }
  return adv;
}

/// R_t = V_old(s_t) + A_t
inline std::vector<double> compute_returns(const RolloutBatch& batch) {
  if (!batch.advantages) throw SequencingError("compute_returns called before advantages were computed");
  const auto& adv = *batch.advantages;
  if (adv.size() != batch.steps.size()) throw ShapeError("advantage count differs from step count");
  std::vector<double> ret(adv.size());
  for (std::size_t t = 0; t < adv.size(); ++t) ret[t] = batch.steps[t].value + adv[t];
  return ret;
}

/// Fills advantages and returns in place.
inline void finalize(RolloutBatch& batch, double gamma, double lambda) {
  batch.advantages = compute_gae(batch, gamma, lambda);
  batch.returns = compute_returns(batch);
}

}  // namespace spolab::gae
