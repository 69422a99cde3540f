#pragma once

// Brute-force reference computations. Deliberately naive and independent of
// the library code paths they are used to check; only verification code and
// tests include this header.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace spolab::oracles {

/// Closed interval of grid points [lo + i*h] that attain the grid maximum
/// exactly. A unique maximizer gives first == last.
struct ArgmaxInterval {
  double first = 0.0;
  double last = 0.0;
  double value = -std::numeric_limits<double>::infinity();
};

template <typename F>
ArgmaxInterval grid_argmax(F&& f, double lo, double hi, double h) {
  ArgmaxInterval out;
  const auto n = static_cast<std::int64_t>(std::floor((hi - lo) / h + 0.5));
  for (std::int64_t i = 0; i <= n; ++i) {
    const double r = lo + static_cast<double>(i) * h;
    const double v = f(r);
    if (v > out.value) {
      out.value = v;
      out.first = out.last = r;
    } else if (v == out.value) {
      out.last = r;
    }
  }
  return out;
}

/// max over all events S of |P(S) - Q(S)|, by enumerating 2^k subsets.
inline double tv_by_events(std::span<const double> p, std::span<const double> q) {
  const std::size_t k = p.size();
  double best = 0.0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
    double ps = 0.0, qs = 0.0;
    for (std::size_t i = 0; i < k; ++i)
      if (mask & (std::uint64_t{1} << i)) {
        ps += p[i];
        qs += q[i];
      }
    best = std::max(best, std::abs(ps - qs));
  }
  return best;
}

/// A_t = sum_{k>=0} (gamma*lambda)^k delta_{t+k}, summed explicitly and
/// stopped after the first done at or after t.
inline std::vector<double> gae_double_loop(std::span<const double> rewards, std::span<const double> values,
                                           std::span<const bool> dones, double bootstrap, double gamma,
                                           double lambda) {
  const std::size_t n = rewards.size();
  std::vector<double> delta(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double next = dones[t] ? 0.0 : (t + 1 < n ? values[t + 1] : bootstrap);
    delta[t] = rewards[t] + gamma * next - values[t];
  }
  std::vector<double> adv(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double weight = 1.0;
    for (std::size_t k = t; k < n; ++k) {
      adv[t] += weight * delta[k];
      if (dones[k]) break;
      weight *= gamma * lambda;
    }
  }
  return adv;
}

/// Discounted sum r_t + gamma r_{t+1} + ... (+ gamma^{n-t} bootstrap).
inline std::vector<double> discounted_returns(std::span<const double> rewards, double gamma, double bootstrap) {
  const std::size_t n = rewards.size();
  std::vector<double> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    double g = 0.0, w = 1.0;
    for (std::size_t k = t; k < n; ++k) {
      g += w * rewards[k];
      w *= gamma;
    }
    out[t] = g + w * bootstrap;
  }
  return out;
}

/// (f(x+h) - f(x-h)) / 2h
template <typename F>
double central_difference(F&& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// |a - b| relative to the larger magnitude, with an absolute floor.
inline double relative_error(double a, double b, double floor = 1e-5) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Visitation by truncated power series: (1-gamma) sum_t gamma^t rho0 M^t.
inline std::vector<double> visitation_power_series(const std::vector<std::vector<double>>& m_pi,
                                                   std::span<const double> rho0, double gamma,
                                                   std::size_t iterations) {
  const std::size_t n = rho0.size();
  std::vector<double> dist(rho0.begin(), rho0.end()), acc(n, 0.0), next(n);
  double w = 1.0 - gamma;
  for (std::size_t it = 0; it < iterations; ++it) {
    for (std::size_t s = 0; s < n; ++s) acc[s] += w * dist[s];
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t s2 = 0; s2 < n; ++s2) next[s2] += dist[s] * m_pi[s][s2];
    dist.swap(next);
    w *= gamma;
  }
  return acc;
}

}  // namespace spolab::oracles
