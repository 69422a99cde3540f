#pragma once

// Property suites behind `spolab verify`. Every suite uses fixed internal
// seeds, compares a library routine against a brute-force reference from
// oracles.hpp (or an exact identity), and reports the worst error seen.

#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "spolab/divergence.hpp"
#include "spolab/gae.hpp"
#include "spolab/grad.hpp"
#include "spolab/objectives.hpp"
#include "spolab/oracles.hpp"
#include "spolab/policy.hpp"
#include "spolab/rng.hpp"
#include "spolab/tabular.hpp"

namespace spolab::verify {

struct SuiteResult {
  std::string name;
  std::size_t cases = 0;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct Suite {
  std::string name;
  std::function<SuiteResult()> run;
};

namespace detail {

inline void track(SuiteResult& r, double err) {
  if (!(err <= r.max_error)) r.max_error = err;  // also captures NaN
}

inline std::vector<double> random_simplex(std::size_t k, Rng& rng) {
  std::vector<double> p(k);
  double s = 0.0;
  for (auto& x : p) {
    x = -std::log(1.0 - rng.uniform());
    s += x;
  }
  for (auto& x : p) x /= s;
  return p;
}

/// Mixture of p with a fresh random point, so small divergences are sampled too.
inline std::vector<double> nearby_simplex(const std::vector<double>& p, double weight, Rng& rng) {
  auto q = random_simplex(p.size(), rng);
  for (std::size_t i = 0; i < p.size(); ++i) q[i] = (1.0 - weight) * p[i] + weight * q[i];
  return q;
}

}  // namespace detail

/// Grid argmax of f_spo and f_simple lands on 1 + sign(A) eps for random
/// (A, eps); f_ppo's maximizer set reaches the grid edge.
inline SuiteResult epsilon_alignment(std::size_t pairs = 1000, double grid_step = 1e-5, double tol = 1e-4) {
  SuiteResult res{"epsilon_aligned", 0, 0.0, tol, true, {}, 0.0};
  Rng rng(11);
  std::size_t ppo_failures = 0;
  for (std::size_t i = 0; i < pairs; ++i) {
    double A = rng.uniform(-3.0, 3.0);
    if (std::abs(A) < 1e-3) A = (A < 0 ? -1e-3 : 1e-3);
    const double eps = rng.uniform(0.01, 0.99);
    const double target = 1.0 + objectives::sign(A) * eps;
    for (auto kind : {objectives::ObjectiveKind::Spo, objectives::ObjectiveKind::SimpleAligned}) {
      const auto am = oracles::grid_argmax([&](double r) { return objectives::objective(kind, r, A, eps); }, 0.0, 3.0,
                                           grid_step);
      detail::track(res, std::max(std::abs(am.first - target), std::abs(am.last - target)));
      ++res.cases;
    }
    // Coarser grid suffices to see the plateau of f_ppo extend to the edge.
    const auto ppo = oracles::grid_argmax([&](double r) { return objectives::f_ppo(r, A, eps); }, 0.0, 3.0, 1e-3);
    const double spread = std::max(std::abs(ppo.first - target), std::abs(ppo.last - target));
    const bool at_edge = A > 0 ? ppo.last == 3.0 : ppo.first == 0.0;
    if (spread > tol && at_edge) ++ppo_failures;
  }
  res.passed = res.max_error <= tol && ppo_failures == pairs;
  res.detail = "f_ppo failed alignment on " + std::to_string(ppo_failures) + "/" + std::to_string(pairs) + " pairs";
  return res;
}

/// Concavity: second differences of f_spo and f_simple in r are <= 0.
inline SuiteResult concavity(std::size_t pairs = 200) {
  SuiteResult res{"concavity", 0, 0.0, 1e-12, true, {}, 0.0};
  Rng rng(12);
  const double h = 1e-3;
  for (std::size_t i = 0; i < pairs; ++i) {
    const double A = rng.uniform(-3.0, 3.0);
    const double eps = rng.uniform(0.01, 0.99);
    for (auto kind : {objectives::ObjectiveKind::Spo, objectives::ObjectiveKind::SimpleAligned}) {
      for (double r = h; r < 3.0; r += 0.01) {
        const double d2 = objectives::objective(kind, r + h, A, eps) - 2.0 * objectives::objective(kind, r, A, eps) +
                          objectives::objective(kind, r - h, A, eps);
        detail::track(res, std::max(d2, 0.0));
        ++res.cases;
      }
    }
  }
  res.passed = res.max_error <= res.tolerance;
  return res;
}

/// f_ppo_grad against the three-case table and against central differences
/// of f_ppo away from the kinks.
inline SuiteResult ppo_gradient(std::size_t points = 10'000, double tol = 1e-7) {
  SuiteResult res{"ppo_gradient", 0, 0.0, tol, true, {}, 0.0};
  Rng rng(21);
  std::size_t table_mismatch = 0;
  std::array<std::size_t, 3> case_hits{};
  for (std::size_t i = 0; i < points; ++i) {
    const double A = rng.uniform(-2.0, 2.0);
    const double eps = rng.uniform(0.05, 0.5);
    const double r = rng.uniform(0.0, 2.0);
    double expected;
    if (A > 0 && r <= 1.0 + eps) {
      expected = A;
      ++case_hits[0];
    } else if (A < 0 && r >= 1.0 - eps) {
      expected = A;
      ++case_hits[1];
    } else {
      expected = 0.0;
      ++case_hits[2];
    }
    if (objectives::f_ppo_grad(r, A, eps) != expected) ++table_mismatch;
    ++res.cases;
    if (std::abs(r - (1.0 + eps)) > 1e-3 && std::abs(r - (1.0 - eps)) > 1e-3) {
      const double fd = oracles::central_difference([&](double x) { return objectives::f_ppo(x, A, eps); }, r, 1e-6);
      detail::track(res, std::abs(fd - objectives::f_ppo_grad(r, A, eps)));
    }
  }
  res.passed = table_mismatch == 0 && res.max_error <= tol && case_hits[0] > 0 && case_hits[1] > 0 && case_hits[2] > 0;
  res.detail = "table mismatches " + std::to_string(table_mismatch) + ", case hits " + std::to_string(case_hits[0]) +
               "/" + std::to_string(case_hits[1]) + "/" + std::to_string(case_hits[2]);
  return res;
}

/// E_{s~rho_pi}[TV] (by event enumeration) equals (1/2) E_{s,a~pi}|ratio-1|
/// on the 8-state, 3-action grid-MDP.
inline SuiteResult tv_identity(std::size_t policy_pairs = 20, double tol = 1e-12) {
  SuiteResult res{"tv_identity", 0, 0.0, tol, true, {}, 0.0};
  Rng mdp_rng(0);
  const auto mdp = tabular::random_mdp(8, 3, 0.99, mdp_rng, true);
  Rng rng(31);
  for (std::size_t i = 0; i < policy_pairs; ++i) {
    const auto pi = tabular::random_policy(8, 3, rng);
    const auto pi_tilde = tabular::random_policy(8, 3, rng);
    const auto rho = tabular::exact_visitation(mdp, pi);
    double tv_events = 0.0;
    for (std::size_t s = 0; s < 8; ++s) tv_events += rho[s] * oracles::tv_by_events(pi[s], pi_tilde[s]);
    const double half_dev = divergence::expected_half_ratio_deviation(rho, pi, pi_tilde);
    detail::track(res, std::abs(tv_events - half_dev));
    ++res.cases;
  }
  res.passed = res.max_error <= tol;
  return res;
}

/// Pinsker (tv <= sqrt(kl/2)) and the KL-ball-inside-TV-ball inclusion.
inline SuiteResult pinsker(std::size_t pairs = 10'000, double tol = 1e-12) {
  SuiteResult res{"pinsker", 0, 0.0, tol, true, {}, 0.0};
  Rng rng(41);
  std::size_t inclusion_violations = 0, inside = 0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const std::size_t k = 2 + rng.below(7);
    const auto p = detail::random_simplex(k, rng);
    const auto q = (i % 2 == 0) ? detail::random_simplex(k, rng) : detail::nearby_simplex(p, rng.uniform(), rng);
    const auto rep = divergence::compare(p, q);
    detail::track(res, std::max(-rep.pinsker_slack, 0.0));
    const double delta_kl = rng.uniform(0.0, 0.5);
    if (rep.kl <= delta_kl) {
      ++inside;
      if (!(rep.tv <= std::sqrt(delta_kl / 2.0))) ++inclusion_violations;
    }
    ++res.cases;
  }
  res.passed = res.max_error <= tol && inclusion_violations == 0 && inside > 0;
  res.detail = std::to_string(inside) + " pairs inside the KL ball, " + std::to_string(inclusion_violations) +
               " outside the TV ball";
  return res;
}

/// Bounded ratio at the anchor action with unbounded KL.
inline SuiteResult kl_escape(double eps = 0.2) {
  SuiteResult res{"kl_escape", 0, 0.0, 0.0, true, {}, 0.0};
  bool ok = true;
  double prev_min = 1.0;
  for (double target : {1.0, 5.0, 10.0, 50.0}) {
    const auto pair = divergence::kl_escape_demo(3, eps, target);
    const double r = pair.q[pair.anchor_action] / pair.p[pair.anchor_action];
    const double kl = divergence::kl_categorical(pair.p, pair.q);
    const double min_mass = *std::min_element(pair.q.begin(), pair.q.end());
    ok = ok && r == 1.0 && kl >= target && min_mass < prev_min;
    prev_min = min_mass;
    detail::track(res, std::abs(r - 1.0));
    ++res.cases;
  }
  res.passed = ok;
  return res;
}

/// eta(pi~) - eta(pi) = 1/(1-gamma) sum rho_pi~ pi~ A_pi on random MDPs.
inline SuiteResult performance_difference(std::size_t instances = 100, double tol = 1e-8) {
  SuiteResult res{"performance_difference", 0, 0.0, tol, true, {}, 0.0};
  Rng rng(51);
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t ns = 2 + rng.below(7);
    const std::size_t na = 2 + rng.below(3);
    const double gamma = rng.uniform(0.5, 0.99);
    const auto mdp = tabular::random_mdp(ns, na, gamma, rng, i % 2 == 0);
    const auto pi = tabular::random_policy(ns, na, rng);
    const auto pt = tabular::random_policy(ns, na, rng);
    const auto pd = tabular::performance_difference_check(mdp, pi, pt);
    detail::track(res, std::abs(pd.lhs - pd.rhs));
    ++res.cases;
  }
  res.passed = res.max_error <= tol;
  return res;
}

/// Backward-recursion GAE against the explicit double sum.
inline SuiteResult gae_oracle(std::size_t episodes = 1000, double tol = 1e-10) {
  SuiteResult res{"gae_oracle", 0, 0.0, tol, true, {}, 0.0};
  Rng rng(61);
  for (std::size_t e = 0; e < episodes; ++e) {
    const std::size_t n = 1 + rng.below(64);
    const double gamma = rng.uniform(0.0, 1.0);
    const double lambda = rng.uniform(0.0, 1.0);
    gae::RolloutBatch b;
    std::vector<double> rewards(n), values(n);
    std::unique_ptr<bool[]> dones(new bool[n]);
    for (std::size_t t = 0; t < n; ++t) {
      gae::RolloutStep s;
      s.reward = rewards[t] = rng.normal();
      s.value = values[t] = rng.normal();
      dones[t] = rng.uniform() < 0.1;
      s.done = dones[t];
      b.steps.push_back(s);
    }
    b.bootstrap_value = dones[n - 1] ? 0.0 : rng.normal();
    const auto adv = gae::compute_gae(b, gamma, lambda);
    const auto ref = oracles::gae_double_loop(rewards, values, std::span<const bool>(dones.get(), n),
                                              b.bootstrap_value, gamma, lambda);
    for (std::size_t t = 0; t < n; ++t) detail::track(res, std::abs(adv[t] - ref[t]));
    ++res.cases;
  }
  res.passed = res.max_error <= tol;
  return res;
}

/// backward() against central differences of <c, forward(x)> on random
/// small nets (up to 3 layers, width up to 8).
inline SuiteResult gradient_check(std::size_t nets = 100, double tol = 1e-4) {
  SuiteResult res{"gradient_check", 0, 0.0, tol, true, {}, 0.0};
  Rng rng(71);
  const double h = 1e-5;
  for (std::size_t t = 0; t < nets; ++t) {
    const std::size_t layers = 1 + rng.below(3);
    std::vector<std::size_t> sizes;
    for (std::size_t i = 0; i <= layers; ++i) sizes.push_back(1 + rng.below(8));
    grad::MlpParams p = grad::make_zero_mlp(sizes);
    for (auto& l : p.layers) {
      for (auto& w : l.weight.data) w = rng.normal(0.0, 0.7);
      for (auto& b : l.bias) b = rng.normal(0.0, 0.3);
    }
    std::vector<double> x(sizes.front()), c(sizes.back());
    for (auto& v : x) v = rng.normal();
    for (auto& v : c) v = rng.normal();
    const grad::GradBuffer g = grad::backward(p, x, c);
    auto loss = [&](const grad::MlpParams& q) {
      const auto y = grad::forward(q, x);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += c[i] * y[i];
      return s;
    };
    for (std::size_t k = 0; k < p.layers.size(); ++k) {
      auto probe = [&](double& slot, double analytic) {
        const double orig = slot;
        const double fd = oracles::central_difference(
            [&](double v) {
              slot = v;
              return loss(p);
            },
            orig, h);
        slot = orig;
        detail::track(res, oracles::relative_error(analytic, fd));
        ++res.cases;
      };
      for (std::size_t i = 0; i < p.layers[k].weight.data.size(); ++i)
        probe(p.layers[k].weight.data[i], g.layers[k].weight.data[i]);
      for (std::size_t i = 0; i < p.layers[k].bias.size(); ++i) probe(p.layers[k].bias[i], g.layers[k].bias[i]);
    }
  }
  res.passed = res.max_error <= tol;
  return res;
}

/// Analytic log-prob gradients of both heads against central differences.
inline SuiteResult logprob_gradient(std::size_t draws = 200, double tol = 1e-5) {
  SuiteResult res{"logprob_gradient", 0, 0.0, tol, true, {}, 0.0};
  Rng rng(81);
  const double h = 1e-6;
  for (std::size_t t = 0; t < draws; ++t) {
    const std::size_t k = 2 + rng.below(6);
    policy::Categorical cat;
    for (std::size_t i = 0; i < k; ++i) cat.logits.push_back(rng.normal(0.0, 2.0));
    const std::size_t a = rng.below(k);
    const auto g = policy::log_prob_grad_logits(cat, a);
    for (std::size_t i = 0; i < k; ++i) {
      policy::Categorical c2 = cat;
      const double fd = oracles::central_difference(
          [&](double v) {
            c2.logits[i] = v;
            return policy::log_prob(c2, a);
          },
          cat.logits[i], h);
      detail::track(res, std::abs(fd - g[i]));
      ++res.cases;
    }
    const std::size_t d = 1 + rng.below(4);
    std::vector<double> mean(d), ls(d), x(d);
    for (std::size_t i = 0; i < d; ++i) {
      mean[i] = rng.normal();
      ls[i] = rng.uniform(-1.0, 0.5);
      x[i] = mean[i] + std::exp(ls[i]) * rng.normal();
    }
    const policy::DiagGaussian gauss(mean, ls);
    const auto gg = policy::log_prob_grad(gauss, x);
    for (std::size_t i = 0; i < d; ++i) {
      const double fdm = oracles::central_difference(
          [&](double v) {
            auto m2 = mean;
            m2[i] = v;
            return policy::log_prob(policy::DiagGaussian(m2, ls), x);
          },
          mean[i], h);
      const double fds = oracles::central_difference(
          [&](double v) {
            auto l2 = ls;
            l2[i] = v;
            return policy::log_prob(policy::DiagGaussian(mean, l2), x);
          },
          ls[i], h);
      detail::track(res, std::abs(fdm - gg.mean[i]));
      detail::track(res, std::abs(fds - gg.log_std[i]));
      res.cases += 2;
    }
  }
  res.passed = res.max_error <= tol;
  return res;
}

inline std::vector<Suite> all_suites() {
  return {
      {"epsilon_aligned", [] { return epsilon_alignment(); }},
      {"concavity", [] { return concavity(); }},
      {"ppo_gradient", [] { return ppo_gradient(); }},
      {"tv_identity", [] { return tv_identity(); }},
      {"pinsker", [] { return pinsker(); }},
      {"kl_escape", [] { return kl_escape(); }},
      {"performance_difference", [] { return performance_difference(); }},
      {"gae_oracle", [] { return gae_oracle(); }},
      {"gradient_check", [] { return gradient_check(); }},
      {"logprob_gradient", [] { return logprob_gradient(); }},
  };
}

/// Runs every suite whose name contains `filter` (all when empty), timing each.
inline std::vector<SuiteResult> run_suites(std::string_view filter = {}) {
  std::vector<SuiteResult> out;
  for (const auto& s : all_suites()) {
    if (!filter.empty() && s.name.find(filter) == std::string::npos) continue;
    const auto t0 = std::chrono::steady_clock::now();
    SuiteResult r;
    try {
      r = s.run();
    } catch (const std::exception& e) {
      r.name = s.name;
      r.passed = false;
      r.detail = std::string("threw: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace spolab::verify
