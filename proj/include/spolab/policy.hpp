#pragma once

// Action distributions on top of a grad::MlpParams network: categorical for
// discrete actions, diagonal Gaussian with a state-independent log-std for
// continuous ones.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "spolab/errors.hpp"
#include "spolab/grad.hpp"
#include "spolab/rng.hpp"

namespace spolab::policy {

using Vector = std::vector<double>;

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kMaxLogRatio = 700.0;

struct Categorical {
  Vector logits;

  /// Logits equal to ln(p); zero-probability entries become -inf.
  static Categorical from_probs(std::span<const double> probs) {
    Categorical c;
    c.logits.reserve(probs.size());
    for (double p : probs) c.logits.push_back(p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity());
    return c;
  }
};

struct DiagGaussian {
  Vector mean;
  Vector log_std;  // always within [kLogStdMin, kLogStdMax]

  DiagGaussian() = default;
  DiagGaussian(Vector m, Vector ls) : mean(std::move(m)), log_std(std::move(ls)) {
    if (mean.size() != log_std.size()) throw ShapeError("gaussian mean and log_std dimensions differ");
    for (auto& s : log_std) s = std::clamp(s, kLogStdMin, kLogStdMax);
  }
};

using PolicyDistribution = std::variant<Categorical, DiagGaussian>;

/// Discrete index or continuous vector.
using Action = std::variant<std::size_t, Vector>;

struct ActionSample {
  Action action;
  double log_prob = 0.0;
};

// ---- categorical helpers -----------------------------------------------------

inline double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) throw DomainError("log-sum-exp of an empty vector");
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

inline Vector softmax(std::span<const double> logits) {
  const double lse = log_sum_exp(logits);
  Vector p(logits.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(logits[i] - lse);
  return p;
}

inline Vector log_softmax(std::span<const double> logits) {
  const double lse = log_sum_exp(logits);
  Vector out(logits.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

// ---- core operations ---------------------------------------------------------

namespace detail {

inline std::size_t discrete_action(const Action& a, std::size_t n) {
  const auto* idx = std::get_if<std::size_t>(&a);
  if (idx == nullptr) throw DomainError("categorical distribution needs a discrete action");
  if (*idx >= n) throw DomainError("action " + std::to_string(*idx) + " outside [0, " + std::to_string(n) + ")");
  return *idx;
}

inline const Vector& continuous_action(const Action& a, std::size_t dim) {
  const auto* v = std::get_if<Vector>(&a);
  if (v == nullptr) throw DomainError("gaussian distribution needs a continuous action");
  if (v->size() != dim) throw ShapeError("action has dimension " + std::to_string(v->size()) + ", expected " + std::to_string(dim));
  return *v;
}

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2*pi)

}  // namespace detail

inline double log_prob(const Categorical& d, const Action& a) {
  const std::size_t i = detail::discrete_action(a, d.logits.size());
  return d.logits[i] - log_sum_exp(d.logits);
}

inline double log_prob(const DiagGaussian& d, const Action& a) {
  const Vector& x = detail::continuous_action(a, d.mean.size());
  double lp = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = (x[i] - d.mean[i]) * std::exp(-d.log_std[i]);
    lp += -0.5 * z * z - d.log_std[i] - detail::kHalfLog2Pi;
  }
  return lp;
}

inline double log_prob(const PolicyDistribution& d, const Action& a) {
  return std::visit([&](const auto& dist) { return log_prob(dist, a); }, d);
}

inline double entropy(const Categorical& d) {
  const Vector lp = log_softmax(d.logits);
  double h = 0.0;
  for (double l : lp)
    if (std::isfinite(l)) h -= std::exp(l) * l;
  return h;
}

inline double entropy(const DiagGaussian& d) {
  double h = 0.0;
  for (double s : d.log_std) h += s + 0.5 + detail::kHalfLog2Pi;
  return h;
}

inline double entropy(const PolicyDistribution& d) {
  return std::visit([](const auto& dist) { return entropy(dist); }, d);
}

inline ActionSample sample(const Categorical& d, Rng& rng) {
  const Vector p = softmax(d.logits);
  const double u = rng.uniform();
  double cum = 0.0;
  std::size_t pick = p.size() - 1;
  for (std::size_t i = 0; i < p.size(); ++i) {
    cum += p[i];
    if (u < cum) {
      pick = i;
      break;
    }
  }
  // Floating-point slack can leave u above the final cumulative sum; never land on a zero-mass action.
  while (p[pick] == 0.0 && pick > 0) --pick;
  ActionSample s{pick, 0.0};
  s.log_prob = log_prob(d, s.action);
  return s;
}

inline ActionSample sample(const DiagGaussian& d, Rng& rng) {
  Vector x(d.mean.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = d.mean[i] + std::exp(d.log_std[i]) * rng.normal();
  ActionSample s{std::move(x), 0.0};
  s.log_prob = log_prob(d, s.action);
  return s;
}

inline ActionSample sample(const PolicyDistribution& d, Rng& rng) {
  return std::visit([&](const auto& dist) { return sample(dist, rng); }, d);
}

/// Most likely action: argmax for categorical, the mean for Gaussian.
inline Action mode(const PolicyDistribution& d) {
  if (const auto* c = std::get_if<Categorical>(&d))
    return static_cast<std::size_t>(std::max_element(c->logits.begin(), c->logits.end()) - c->logits.begin());
  return std::get<DiagGaussian>(d).mean;
}

/// pi_new(a|s) / pi_old(a|s) from log-probabilities.
inline double ratio(double new_log_prob, double old_log_prob) {
  if (!std::isfinite(new_log_prob) || !std::isfinite(old_log_prob))
    throw DomainError("ratio needs finite log-probabilities");
  const double diff = new_log_prob - old_log_prob;
  if (diff > kMaxLogRatio) throw RatioOverflowError(new_log_prob, old_log_prob);
  return std::exp(diff);
}

// ---- analytic gradients ------------------------------------------------------

/// d log p(a) / d logits = one_hot(a) - softmax(logits).
inline Vector log_prob_grad_logits(const Categorical& d, std::size_t action) {
  if (action >= d.logits.size()) throw DomainError("action out of range");
  Vector g = softmax(d.logits);
  for (auto& x : g) x = -x;
  g[action] += 1.0;
  return g;
}

/// dH/dlogit_i = -p_i (log p_i + H).
inline Vector entropy_grad_logits(const Categorical& d) {
  const Vector lp = log_softmax(d.logits);
  double h = 0.0;
  for (double l : lp)
    if (std::isfinite(l)) h -= std::exp(l) * l;
  Vector g(lp.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (std::isfinite(lp[i])) g[i] = -std::exp(lp[i]) * (lp[i] + h);
  return g;
}

struct GaussianLogProbGrad {
  Vector mean;
  Vector log_std;
};

inline GaussianLogProbGrad log_prob_grad(const DiagGaussian& d, const Vector& x) {
  if (x.size() != d.mean.size()) throw ShapeError("action dimension mismatch");
  GaussianLogProbGrad g{Vector(x.size()), Vector(x.size())};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double inv_var = std::exp(-2.0 * d.log_std[i]);
    const double diff = x[i] - d.mean[i];
    g.mean[i] = diff * inv_var;
    g.log_std[i] = diff * diff * inv_var - 1.0;
  }
  return g;
}

// ---- policy model ------------------------------------------------------------

enum class HeadKind { Categorical, Gaussian };

/// Network plus head. For Gaussian heads the network emits the mean and
/// log_std is a free parameter vector (not clamped here; clamping happens when
/// the distribution is built).
struct PolicyModel {
  HeadKind head = HeadKind::Categorical;
  grad::MlpParams net;
  Vector log_std;

  PolicyDistribution distribution_from_output(const Vector& out) const {
    if (head == HeadKind::Categorical) return Categorical{out};
    return DiagGaussian(out, log_std);
  }

  PolicyDistribution distribution(std::span<const double> state) const {
    return distribution_from_output(grad::forward(net, state));
  }
};

inline PolicyModel make_policy_model(HeadKind head, std::size_t obs_dim, std::size_t action_dim,
                                     std::span<const std::size_t> hidden, Rng& rng, double output_gain = 0.01,
                                     double initial_log_std = 0.0) {
  std::vector<std::size_t> sizes{obs_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(action_dim);
  PolicyModel m;
  m.head = head;
  m.net = grad::init_orthogonal(std::move(sizes), {std::sqrt(2.0), output_gain}, rng);
  if (head == HeadKind::Gaussian) m.log_std.assign(action_dim, initial_log_std);
  return m;
}

}  // namespace spolab::policy
