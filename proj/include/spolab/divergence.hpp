#pragma once

// Total-variation and KL divergences, the ratio-deviation metric, and the
// constructions that relate them.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "spolab/errors.hpp"
#include "spolab/tabular.hpp"

namespace spolab::divergence {

using Vector = std::vector<double>;

/// Returned by KL when q has a zero where p does not. A value, not an error,
/// so sweeps can record it.
inline constexpr double kInfiniteDivergence = std::numeric_limits<double>::infinity();

inline bool is_infinite_divergence(double d) { return std::isinf(d) && d > 0.0; }

inline void require_simplex(std::span<const double> p, const char* name) {
  double s = 0.0;
  for (double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError(std::string(name) + " has a negative or non-finite entry");
    s += x;
  }
  if (std::abs(s - 1.0) > 1e-9) throw DomainError(std::string(name) + " sums to " + std::to_string(s));
}

inline void require_pair(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ShapeError("distributions have different support sizes");
  if (p.empty()) throw ShapeError("empty distribution");
  require_simplex(p, "p");
  require_simplex(q, "q");
}

/// (1/2) sum |p_i - q_i|
inline double tv_categorical(std::span<const double> p, std::span<const double> q) {
  require_pair(p, q);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

/// sum p_i ln(p_i/q_i) with 0 ln(0/q) = 0; kInfiniteDivergence when p is not
/// absolutely continuous w.r.t. q.
inline double kl_categorical(std::span<const double> p, std::span<const double> q) {
  require_pair(p, q);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) return kInfiniteDivergence;
    s += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(s, 0.0);
}

inline double kl_gaussian_diag(std::span<const double> mean1, std::span<const double> log_std1,
                               std::span<const double> mean2, std::span<const double> log_std2) {
  const std::size_t d = mean1.size();
  if (log_std1.size() != d || mean2.size() != d || log_std2.size() != d)
    throw ShapeError("gaussian KL needs equal dimensions");
  double kl = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double var_ratio = std::exp(2.0 * (log_std1[i] - log_std2[i]));
    const double diff = mean1[i] - mean2[i];
    kl += log_std2[i] - log_std1[i] + 0.5 * (var_ratio + diff * diff * std::exp(-2.0 * log_std2[i])) - 0.5;
  }
  return std::max(kl, 0.0);
}

/// mean |r - 1|
inline double ratio_deviation(std::span<const double> ratios) {
  if (ratios.empty()) throw EmptyBatchError("ratio_deviation on an empty batch");
  double s = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw DomainError("ratios must be positive");
    s += std::abs(r - 1.0);
  }
  return s / static_cast<double>(ratios.size());
}

struct DivergenceReport {
  double tv = 0.0;
  double kl = 0.0;
  double pinsker_slack = 0.0;  // sqrt(kl/2) - tv
};

inline DivergenceReport compare(std::span<const double> p, std::span<const double> q) {
  DivergenceReport r;
  r.tv = tv_categorical(p, q);
  r.kl = kl_categorical(p, q);
  r.pinsker_slack = std::sqrt(r.kl / 2.0) - r.tv;
  return r;
}

// ---- state-weighted expectations over tabular policies -----------------------

/// E_{s ~ w}[TV(pi(.|s), pi_tilde(.|s))]
inline double expected_tv(std::span<const double> state_weights, const tabular::TabularPolicy& pi,
                          const tabular::TabularPolicy& pi_tilde) {
  if (state_weights.size() != pi.size() || pi.size() != pi_tilde.size()) throw ShapeError("policy tables disagree");
  double acc = 0.0;
  for (std::size_t s = 0; s < pi.size(); ++s) acc += state_weights[s] * tv_categorical(pi[s], pi_tilde[s]);
  return acc;
}

/// (1/2) E_{s ~ w, a ~ pi}|pi_tilde(a|s)/pi(a|s) - 1|. Actions with pi(a|s) = 0
/// carry no weight.
inline double expected_half_ratio_deviation(std::span<const double> state_weights, const tabular::TabularPolicy& pi,
                                            const tabular::TabularPolicy& pi_tilde) {
  if (state_weights.size() != pi.size() || pi.size() != pi_tilde.size()) throw ShapeError("policy tables disagree");
  double acc = 0.0;
  for (std::size_t s = 0; s < pi.size(); ++s) {
    if (pi[s].size() != pi_tilde[s].size()) throw ShapeError("policy rows disagree");
    double inner = 0.0;
    for (std::size_t a = 0; a < pi[s].size(); ++a)
      if (pi[s][a] > 0.0) inner += pi[s][a] * std::abs(pi_tilde[s][a] / pi[s][a] - 1.0);
    acc += state_weights[s] * inner;
  }
  return 0.5 * acc;
}

// ---- unbounded KL under a bounded ratio --------------------------------------

struct KlEscapePair {
  Vector p;                       // uniform
  Vector q;                       // q[anchor] == p[anchor]
  std::size_t anchor_action = 0;  // the action whose ratio is pinned to 1
  double kl = 0.0;                // kl_categorical(p, q)
};

/// Builds p uniform over num_actions and q that agrees with p on action 0
/// (so the ratio there is exactly 1, inside any clip band) while
/// KL(p || q) >= target_kl. Action 1 absorbs the displaced mass and actions
/// 2.. share a vanishing mass mu, found by bisection on log(mu).
inline KlEscapePair kl_escape_demo(std::size_t num_actions, double eps, double target_kl) {
  if (num_actions < 3) throw DomainError("the construction needs at least 3 actions");
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  if (!(target_kl >= 0.0) || !std::isfinite(target_kl)) throw DomainError("target_kl must be finite and >= 0");

  const double n = static_cast<double>(num_actions);
  const double u = 1.0 / n;
  KlEscapePair out;
  out.p.assign(num_actions, u);

  auto build = [&](double mu) {
    Vector q(num_actions, mu);
    q[0] = u;
    q[1] = 1.0 - u - (n - 2.0) * mu;
    return q;
  };
  auto kl_at = [&](double mu) {
    const Vector q = build(mu);
    double s = 0.0;
    for (std::size_t i = 0; i < num_actions; ++i) s += u * std::log(u / q[i]);
    return s;
  };

  if (target_kl == 0.0) {
    out.q = out.p;
    out.kl = 0.0;
    return out;
  }
  const double tiny = std::numeric_limits<double>::min();
  if (kl_at(tiny) < target_kl)
    throw DomainError("target KL " + std::to_string(target_kl) + " is not reachable in double precision with " +
                      std::to_string(num_actions) + " actions");

  // kl_at is decreasing in mu on (0, 1/n]; keep lo on the feasible side.
  double lo = std::log(tiny);
  double hi = std::log(u);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (kl_at(std::exp(mid)) >= target_kl)
      lo = mid;
    else
      hi = mid;
  }
  out.q = build(std::exp(lo));
  out.kl = kl_categorical(out.p, out.q);
  return out;
}

}  // namespace spolab::divergence
