#pragma once

// Finite MDPs with exact (linear-solve) policy evaluation. These back the
// identity checks that need ground truth rather than samples.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spolab/errors.hpp"
#include "spolab/rng.hpp"

namespace spolab::tabular {

/// policy[s][a] = pi(a|s)
using TabularPolicy = std::vector<std::vector<double>>;

struct TabularMdp {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  /// transition[s][a][s'] = P(s'|s,a)
  std::vector<std::vector<std::vector<double>>> transition;
  /// reward[s][a] = r(s,a)
  std::vector<std::vector<double>> reward;
  double gamma = 0.99;
  std::vector<double> initial;
};

inline bool is_simplex(const std::vector<double>& p, double tol) {
  double s = 0.0;
  for (double x : p) {
    if (!(x >= 0.0)) return false;
    s += x;
  }
  return std::abs(s - 1.0) <= tol;
}

inline void validate(const TabularMdp& m) {
  if (m.num_states == 0 || m.num_actions == 0) throw ShapeError("MDP needs at least one state and one action");
  if (m.transition.size() != m.num_states || m.reward.size() != m.num_states || m.initial.size() != m.num_states)
    throw ShapeError("MDP tables disagree with num_states");
  for (std::size_t s = 0; s < m.num_states; ++s) {
    if (m.transition[s].size() != m.num_actions || m.reward[s].size() != m.num_actions)
      throw ShapeError("MDP tables disagree with num_actions at state " + std::to_string(s));
    for (std::size_t a = 0; a < m.num_actions; ++a) {
      if (m.transition[s][a].size() != m.num_states) throw ShapeError("transition row has the wrong length");
      if (!is_simplex(m.transition[s][a], 1e-12))
        throw DomainError("P(.|" + std::to_string(s) + "," + std::to_string(a) + ") is not a distribution");
    }
  }
  if (!is_simplex(m.initial, 1e-12)) throw DomainError("initial distribution does not sum to 1");
  if (!(m.gamma >= 0.0 && m.gamma < 1.0)) throw ConfigError("tabular evaluation needs gamma in [0, 1)");
}

inline void validate(const TabularMdp& m, const TabularPolicy& pi) {
  if (pi.size() != m.num_states) throw ShapeError("policy table has the wrong number of states");
  for (std::size_t s = 0; s < m.num_states; ++s) {
    if (pi[s].size() != m.num_actions) throw ShapeError("policy row has the wrong number of actions");
    if (!is_simplex(pi[s], 1e-9)) throw DomainError("policy row " + std::to_string(s) + " is not a distribution");
  }
}

inline std::vector<double> random_simplex(std::size_t n, Rng& rng) {
  std::vector<double> p(n);
  double s = 0.0;
  for (auto& x : p) {
    x = -std::log(1.0 - rng.uniform());  // Exp(1) -> flat Dirichlet
    s += x;
  }
  for (auto& x : p) x /= s;
  return p;
}

/// Random MDP with Dirichlet(1) transition rows, U(-1,1) rewards and a point
/// initial distribution on state 0 (or a random one when point_initial is false).
inline TabularMdp random_mdp(std::size_t num_states, std::size_t num_actions, double gamma, Rng& rng,
                             bool point_initial = true) {
  TabularMdp m;
  m.num_states = num_states;
  m.num_actions = num_actions;
  m.gamma = gamma;
  m.transition.assign(num_states, std::vector<std::vector<double>>(num_actions));
  m.reward.assign(num_states, std::vector<double>(num_actions));
  for (std::size_t s = 0; s < num_states; ++s)
    for (std::size_t a = 0; a < num_actions; ++a) {
      m.transition[s][a] = random_simplex(num_states, rng);
      m.reward[s][a] = rng.uniform(-1.0, 1.0);
    }
  if (point_initial) {
    m.initial.assign(num_states, 0.0);
    m.initial[0] = 1.0;
  } else {
    m.initial = random_simplex(num_states, rng);
  }
  return m;
}

inline TabularPolicy random_policy(std::size_t num_states, std::size_t num_actions, Rng& rng) {
  TabularPolicy pi(num_states);
  for (auto& row : pi) row = random_simplex(num_actions, rng);
  return pi;
}

inline TabularPolicy uniform_policy(std::size_t num_states, std::size_t num_actions) {
  return TabularPolicy(num_states, std::vector<double>(num_actions, 1.0 / static_cast<double>(num_actions)));
}

/// M_pi[s][s'] = sum_a pi(a|s) P(s'|s,a)
inline Eigen::MatrixXd state_transition_matrix(const TabularMdp& m, const TabularPolicy& pi) {
  const auto n = static_cast<Eigen::Index>(m.num_states);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t s = 0; s < m.num_states; ++s)
    for (std::size_t a = 0; a < m.num_actions; ++a)
      for (std::size_t s2 = 0; s2 < m.num_states; ++s2)
        M(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s2)) += pi[s][a] * m.transition[s][a][s2];
  return M;
}

namespace detail {

inline Eigen::VectorXd solve_checked(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const char* what) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible()) throw DomainError(std::string(what) + ": singular linear system");
  Eigen::VectorXd x = lu.solve(b);
  const double residual = (A * x - b).lpNorm<Eigen::Infinity>();
  if (!(residual < 1e-10)) throw DomainError(std::string(what) + ": residual " + std::to_string(residual));
  return x;
}

}  // namespace detail

/// rho_pi(s) = (1-gamma) sum_t gamma^t P(s_t = s | pi), i.e. the solution of
/// rho = (1-gamma) rho0 + gamma M_pi^T rho.
inline std::vector<double> exact_visitation(const TabularMdp& m, const TabularPolicy& pi) {
  validate(m);
  validate(m, pi);
  const auto n = static_cast<Eigen::Index>(m.num_states);
  const Eigen::MatrixXd M = state_transition_matrix(m, pi);
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - m.gamma * M.transpose();
  Eigen::VectorXd b(n);
  for (Eigen::Index s = 0; s < n; ++s) b(s) = (1.0 - m.gamma) * m.initial[static_cast<std::size_t>(s)];
  const Eigen::VectorXd rho = detail::solve_checked(A, b, "exact_visitation");
  return {rho.data(), rho.data() + n};
}

struct QVA {
  std::vector<std::vector<double>> q;
  std::vector<double> v;
  std::vector<std::vector<double>> advantage;
};

/// Solves V = r_pi + gamma M_pi V, then Q = r + gamma P V and A = Q - V.
inline QVA exact_q_v_advantage(const TabularMdp& m, const TabularPolicy& pi) {
  validate(m);
  validate(m, pi);
  const auto n = static_cast<Eigen::Index>(m.num_states);
  const Eigen::MatrixXd M = state_transition_matrix(m, pi);
  Eigen::VectorXd r_pi = Eigen::VectorXd::Zero(n);
  for (std::size_t s = 0; s < m.num_states; ++s)
    for (std::size_t a = 0; a < m.num_actions; ++a) r_pi(static_cast<Eigen::Index>(s)) += pi[s][a] * m.reward[s][a];
  const Eigen::VectorXd V =
      detail::solve_checked(Eigen::MatrixXd::Identity(n, n) - m.gamma * M, r_pi, "exact_q_v_advantage");
  QVA out;
  out.v.assign(V.data(), V.data() + n);
  out.q.assign(m.num_states, std::vector<double>(m.num_actions));
  out.advantage.assign(m.num_states, std::vector<double>(m.num_actions));
  for (std::size_t s = 0; s < m.num_states; ++s)
    for (std::size_t a = 0; a < m.num_actions; ++a) {
      double ev = 0.0;
      for (std::size_t s2 = 0; s2 < m.num_states; ++s2) ev += m.transition[s][a][s2] * out.v[s2];
      out.q[s][a] = m.reward[s][a] + m.gamma * ev;
      out.advantage[s][a] = out.q[s][a] - out.v[s];
    }
  return out;
}

/// eta(pi) = E_{s0 ~ rho0} V_pi(s0)
inline double expected_return(const TabularMdp& m, const TabularPolicy& pi) {
  const QVA e = exact_q_v_advantage(m, pi);
  double eta = 0.0;
  for (std::size_t s = 0; s < m.num_states; ++s) eta += m.initial[s] * e.v[s];
  return eta;
}

struct PerformanceDifference {
  double lhs = 0.0;  // eta(pi_tilde) - eta(pi)
  double rhs = 0.0;  // 1/(1-gamma) sum_s rho_tilde(s) sum_a pi_tilde(a|s) A_pi(s,a)
};

inline PerformanceDifference performance_difference_check(const TabularMdp& m, const TabularPolicy& pi,
                                                          const TabularPolicy& pi_tilde) {
  PerformanceDifference out;
  out.lhs = expected_return(m, pi_tilde) - expected_return(m, pi);
  const QVA base = exact_q_v_advantage(m, pi);
  const std::vector<double> rho = exact_visitation(m, pi_tilde);
  double acc = 0.0;
  for (std::size_t s = 0; s < m.num_states; ++s) {
    double inner = 0.0;
    for (std::size_t a = 0; a < m.num_actions; ++a) inner += pi_tilde[s][a] * base.advantage[s][a];
    acc += rho[s] * inner;
  }
  out.rhs = acc / (1.0 - m.gamma);
  return out;
}

/// Deterministic policy that is greedy in Q_pi.
inline TabularPolicy greedy_policy(const TabularMdp& m, const TabularPolicy& pi) {
  const QVA e = exact_q_v_advantage(m, pi);
  TabularPolicy g(m.num_states, std::vector<double>(m.num_actions, 0.0));
  for (std::size_t s = 0; s < m.num_states; ++s) {
    std::size_t best = 0;
    for (std::size_t a = 1; a < m.num_actions; ++a)
      if (e.q[s][a] > e.q[s][best]) best = a;
    g[s][best] = 1.0;
  }
  return g;
}

}  // namespace spolab::tabular
