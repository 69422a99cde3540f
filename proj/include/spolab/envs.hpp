#pragma once

// Seedable toy environments: classic cart-pole (discrete), a 2-D point-mass
// reacher (continuous) and a small random tabular MDP exposed as an env.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "spolab/errors.hpp"
#include "spolab/policy.hpp"
#include "spolab/rng.hpp"
#include "spolab/tabular.hpp"

namespace spolab::envs {

using Vector = std::vector<double>;
using policy::Action;

struct ActionSpace {
  enum class Kind { Discrete, Continuous };
  Kind kind = Kind::Discrete;
  std::size_t n = 0;  // number of actions (discrete) or dimension (continuous)
  Vector low;
  Vector high;

  static ActionSpace discrete(std::size_t n) { return {Kind::Discrete, n, {}, {}}; }
  static ActionSpace continuous(Vector low, Vector high) {
    if (low.size() != high.size() || low.empty()) throw ShapeError("action bounds must have equal positive length");
    for (std::size_t i = 0; i < low.size(); ++i)
      if (!(low[i] < high[i])) throw DomainError("action bounds need low < high");
    const std::size_t dim = low.size();
    return {Kind::Continuous, dim, std::move(low), std::move(high)};
  }

  bool is_discrete() const { return kind == Kind::Discrete; }

  /// Throws DomainError unless `a` belongs to the space.
  void check(const Action& a) const {
    if (is_discrete()) {
      const auto* i = std::get_if<std::size_t>(&a);
      if (i == nullptr || *i >= n) throw DomainError("action outside discrete space of size " + std::to_string(n));
      return;
    }
    const auto* v = std::get_if<Vector>(&a);
    if (v == nullptr || v->size() != n) throw DomainError("action has the wrong type or dimension");
    for (std::size_t i = 0; i < n; ++i)
      if (!std::isfinite((*v)[i]) || (*v)[i] < low[i] || (*v)[i] > high[i])
        throw DomainError("continuous action component " + std::to_string(i) + " outside its bounds");
  }

  /// Elementwise clamp into the bounds; discrete actions pass through.
  Action clip(const Action& a) const {
    if (is_discrete()) return a;
    Vector v = std::get<Vector>(a);
    for (std::size_t i = 0; i < v.size() && i < n; ++i) v[i] = std::clamp(v[i], low[i], high[i]);
    return v;
  }
};

struct EnvSpec {
  std::size_t observation_dim = 0;
  ActionSpace action_space;
  std::size_t max_episode_steps = 0;
};

struct Transition {
  Vector state;
  Action action;
  double reward = 0.0;
  Vector next_state;
  bool done = false;       // terminal (failure or goal)
  bool truncated = false;  // step cap reached without termination
};

class Env {
 public:
  virtual ~Env() = default;

  virtual const EnvSpec& spec() const = 0;
  /// Reseeds the env's generator and draws s0.
  virtual Vector reset(std::uint64_t seed) = 0;
  /// Draws s0 from the env's current generator state.
  virtual Vector reset() = 0;
  virtual Transition step(const Action& action) = 0;
  virtual std::unique_ptr<Env> clone() const = 0;
  virtual std::string_view id() const = 0;
};

// ---- cart-pole ---------------------------------------------------------------

/// Classic cart-pole: Euler integration, +1 reward per step including the
/// failing one, termination at |x| > 2.4 or |theta| > 12 degrees.
class CartPole final : public Env {
 public:
  static constexpr double kGravity = 9.8;
  static constexpr double kMassCart = 1.0;
  static constexpr double kMassPole = 0.1;
  static constexpr double kTotalMass = kMassCart + kMassPole;
  static constexpr double kHalfLength = 0.5;
  static constexpr double kPoleMassLength = kMassPole * kHalfLength;
  static constexpr double kForceMag = 10.0;
  static constexpr double kTau = 0.02;
  static constexpr double kThetaThreshold = 12.0 * 2.0 * std::numbers::pi / 360.0;
  static constexpr double kXThreshold = 2.4;

  explicit CartPole(std::size_t max_episode_steps = 500)
      : spec_{4, ActionSpace::discrete(2), max_episode_steps} {}

  const EnvSpec& spec() const override { return spec_; }
  std::string_view id() const override { return "cartpole"; }

  Vector reset(std::uint64_t seed) override {
    rng_ = Rng(seed);
    return reset();
  }

  Vector reset() override {
    for (auto& x : state_) x = rng_.uniform(-0.05, 0.05);
    steps_ = 0;
    started_ = true;
    return state_;
  }

  /// Overwrites the physical state; used by tests to set up edge cases.
  void set_state(const Vector& s) {
    if (s.size() != 4) throw ShapeError("cart-pole state has 4 components");
    state_ = s;
    started_ = true;
  }

  Transition step(const Action& action) override {
    if (!started_) throw SequencingError("step called before reset");
    spec_.action_space.check(action);
    Transition t;
    t.state = state_;
    t.action = action;

    const double force = std::get<std::size_t>(action) == 1 ? kForceMag : -kForceMag;
    double& x = state_[0];
    double& x_dot = state_[1];
    double& theta = state_[2];
    double& theta_dot = state_[3];
    const double cos_t = std::cos(theta);
    const double sin_t = std::sin(theta);
    const double temp = (force + kPoleMassLength * theta_dot * theta_dot * sin_t) / kTotalMass;
    const double theta_acc =
        (kGravity * sin_t - cos_t * temp) / (kHalfLength * (4.0 / 3.0 - kMassPole * cos_t * cos_t / kTotalMass));
    const double x_acc = temp - kPoleMassLength * theta_acc * cos_t / kTotalMass;
    x += kTau * x_dot;
    x_dot += kTau * x_acc;
    theta += kTau * theta_dot;
    theta_dot += kTau * theta_acc;

    ++steps_;
    t.reward = 1.0;
    t.next_state = state_;
    t.done = x < -kXThreshold || x > kXThreshold || theta < -kThetaThreshold || theta > kThetaThreshold;
    t.truncated = !t.done && steps_ >= spec_.max_episode_steps;
    return t;
  }

  std::unique_ptr<Env> clone() const override { return std::make_unique<CartPole>(*this); }

 private:
  EnvSpec spec_;
  Rng rng_{0};
  Vector state_ = Vector(4, 0.0);
  std::size_t steps_ = 0;
  bool started_ = false;
};

// ---- point-mass reacher ------------------------------------------------------

/// 2-D double integrator. Observation (pos, vel, goal); action is a force in
/// [-1, 1]^2; vel <- damping*vel + dt*force, pos <- pos + dt*vel; reward is
/// -|pos - goal|^2 after the move. Never terminates; truncated at the cap.
class PointMass final : public Env {
 public:
  static constexpr double kDamping = 0.95;
  static constexpr double kDt = 0.1;

  explicit PointMass(std::size_t max_episode_steps = 200)
      : spec_{6, ActionSpace::continuous({-1.0, -1.0}, {1.0, 1.0}), max_episode_steps} {}

  const EnvSpec& spec() const override { return spec_; }
  std::string_view id() const override { return "pointmass"; }

  Vector reset(std::uint64_t seed) override {
    rng_ = Rng(seed);
    return reset();
  }

  Vector reset() override {
    pos_ = {rng_.uniform(-1.0, 1.0), rng_.uniform(-1.0, 1.0)};
    vel_ = {0.0, 0.0};
    goal_ = {rng_.uniform(-1.0, 1.0), rng_.uniform(-1.0, 1.0)};
    steps_ = 0;
    started_ = true;
    return observation();
  }

  Transition step(const Action& action) override {
    if (!started_) throw SequencingError("step called before reset");
    spec_.action_space.check(action);
    const Vector& f = std::get<Vector>(action);
    Transition t;
    t.state = observation();
    t.action = action;
    for (std::size_t i = 0; i < 2; ++i) {
      vel_[i] = kDamping * vel_[i] + kDt * f[i];
      pos_[i] += kDt * vel_[i];
    }
    const double dx = pos_[0] - goal_[0];
    const double dy = pos_[1] - goal_[1];
    t.reward = -(dx * dx + dy * dy);
    ++steps_;
    t.next_state = observation();
    t.done = false;
    t.truncated = steps_ >= spec_.max_episode_steps;
    return t;
  }

  std::unique_ptr<Env> clone() const override { return std::make_unique<PointMass>(*this); }

  Vector observation() const { return {pos_[0], pos_[1], vel_[0], vel_[1], goal_[0], goal_[1]}; }

 private:
  EnvSpec spec_;
  Rng rng_{0};
  Vector pos_ = Vector(2, 0.0);
  Vector vel_ = Vector(2, 0.0);
  Vector goal_ = Vector(2, 0.0);
  std::size_t steps_ = 0;
  bool started_ = false;
};

// ---- tabular MDP as an env ---------------------------------------------------

inline constexpr std::uint64_t kGridMdpSeed = 0;

/// The default grid-MDP: 8 states, 3 actions, gamma 0.99, point initial
/// distribution on state 0, tables drawn from a fixed seed.
inline tabular::TabularMdp default_grid_mdp() {
  Rng rng(kGridMdpSeed);
  return tabular::random_mdp(8, 3, 0.99, rng, true);
}

/// Observation is the one-hot encoding of the current state.
class GridMdpEnv final : public Env {
 public:
  explicit GridMdpEnv(tabular::TabularMdp mdp = default_grid_mdp(), std::size_t max_episode_steps = 100)
      : mdp_(std::move(mdp)), spec_{0, ActionSpace::discrete(0), max_episode_steps} {
    tabular::validate(mdp_);
    spec_.observation_dim = mdp_.num_states;
    spec_.action_space = ActionSpace::discrete(mdp_.num_actions);
  }

  const EnvSpec& spec() const override { return spec_; }
  std::string_view id() const override { return "gridmdp"; }
  const tabular::TabularMdp& mdp() const { return mdp_; }
  std::size_t state_index() const { return state_; }

  Vector reset(std::uint64_t seed) override {
    rng_ = Rng(seed);
    return reset();
  }

  Vector reset() override {
    state_ = draw(mdp_.initial);
    steps_ = 0;
    started_ = true;
    return one_hot(state_);
  }

  Transition step(const Action& action) override {
    if (!started_) throw SequencingError("step called before reset");
    spec_.action_space.check(action);
    const std::size_t a = std::get<std::size_t>(action);
    Transition t;
    t.state = one_hot(state_);
    t.action = action;
    t.reward = mdp_.reward[state_][a];
    state_ = draw(mdp_.transition[state_][a]);
    ++steps_;
    t.next_state = one_hot(state_);
    t.done = false;
    t.truncated = steps_ >= spec_.max_episode_steps;
    return t;
  }

  std::unique_ptr<Env> clone() const override { return std::make_unique<GridMdpEnv>(*this); }

 private:
  std::size_t draw(const std::vector<double>& p) {
    const double u = rng_.uniform();
    double cum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      cum += p[i];
      if (u < cum) return i;
    }
    for (std::size_t i = p.size(); i-- > 0;)
      if (p[i] > 0.0) return i;
    return 0;
  }

  Vector one_hot(std::size_t s) const {
    Vector v(mdp_.num_states, 0.0);
    v[s] = 1.0;
    return v;
  }

  tabular::TabularMdp mdp_;
  EnvSpec spec_;
  Rng rng_{0};
  std::size_t state_ = 0;
  std::size_t steps_ = 0;
  bool started_ = false;
};

inline bool is_known_env(std::string_view id) { return id == "cartpole" || id == "pointmass" || id == "gridmdp"; }

inline std::unique_ptr<Env> make_env(std::string_view id) {
  if (id == "cartpole") return std::make_unique<CartPole>();
  if (id == "pointmass") return std::make_unique<PointMass>();
  if (id == "gridmdp") return std::make_unique<GridMdpEnv>();
  throw ConfigError("unknown env id '" + std::string(id) + "' (expected cartpole, pointmass or gridmdp)");
}

}  // namespace spolab::envs
