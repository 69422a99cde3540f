#pragma once

// On-policy training loop: collect rollouts with the current policy, freeze
// old log-probs and values, estimate GAE advantages once, then run epochs of
// shuffled mini-batch Adam steps on L = L_p + c1*L_v - c2*L_e.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "spolab/config.hpp"
#include "spolab/divergence.hpp"
#include "spolab/envs.hpp"
#include "spolab/errors.hpp"
#include "spolab/gae.hpp"
#include "spolab/grad.hpp"
#include "spolab/objectives.hpp"
#include "spolab/policy.hpp"
#include "spolab/rng.hpp"

namespace spolab::trainer {

using Vector = std::vector<double>;
using objectives::LossBreakdown;
using objectives::ObjectiveKind;

// Stream ids for Rng::stream(seed, id).
inline constexpr std::uint64_t kPolicyInitStream = 1000;
inline constexpr std::uint64_t kValueInitStream = 1001;
inline constexpr std::uint64_t kShuffleStream = 2000;
inline constexpr std::uint64_t kWorkerStreamBase = 3000;
inline constexpr std::uint64_t kEnvSeedStreamBase = 4000;

/// Policy and value networks with their optimizer state. The two networks
/// share nothing.
struct Agent {
  policy::PolicyModel policy;
  grad::AdamState policy_adam;
  Vector log_std_m;  // Adam moments for the Gaussian log-std vector
  Vector log_std_v;
  grad::MlpParams value;
  grad::AdamState value_adam;

  double value_of(std::span<const double> state) const { return grad::forward(value, state)[0]; }
};

inline Agent make_agent(const TrainConfig& cfg, const envs::EnvSpec& spec) {
  const bool discrete = spec.action_space.is_discrete();
  Rng prng = Rng::stream(cfg.seed, kPolicyInitStream);
  Rng vrng = Rng::stream(cfg.seed, kValueInitStream);
  Agent a;
  a.policy = policy::make_policy_model(discrete ? policy::HeadKind::Categorical : policy::HeadKind::Gaussian,
                                       spec.observation_dim, spec.action_space.n, cfg.hidden_sizes, prng, 0.01,
                                       cfg.initial_log_std);
  a.policy_adam = grad::AdamState(a.policy.net);
  a.log_std_m.assign(a.policy.log_std.size(), 0.0);
  a.log_std_v.assign(a.policy.log_std.size(), 0.0);
  std::vector<std::size_t> vsizes{spec.observation_dim};
  vsizes.insert(vsizes.end(), cfg.hidden_sizes.begin(), cfg.hidden_sizes.end());
  vsizes.push_back(1);
  a.value = grad::init_orthogonal(std::move(vsizes), {std::sqrt(2.0), 1.0}, vrng);
  a.value_adam = grad::AdamState(a.value);
  return a;
}

// ---- rollout collection ------------------------------------------------------

/// One env and its sampling stream. Env state persists across phases.
struct Worker {
  std::unique_ptr<envs::Env> env;
  Rng rng;
  Vector obs;
  double episode_return = 0.0;
  std::size_t episode_length = 0;
};

inline std::vector<Worker> make_workers(const TrainConfig& cfg) {
  std::vector<Worker> ws;
  ws.reserve(cfg.num_workers);
  for (std::size_t i = 0; i < cfg.num_workers; ++i) {
    Worker w{envs::make_env(cfg.env_id), Rng::stream(cfg.seed, kWorkerStreamBase + i), {}, 0.0, 0};
    w.obs = w.env->reset(Rng::stream(cfg.seed, kEnvSeedStreamBase + i).next_u64());
    ws.push_back(std::move(w));
  }
  return ws;
}

struct Rollouts {
  std::vector<gae::RolloutBatch> batches;  // one per worker
  std::vector<double> finished_returns;    // episodes that ended this phase, worker-major order
};

/// Steps one worker `horizon` times with the given nets. Gaussian samples are
/// clipped to the action bounds before reaching the env; the stored log-prob
/// is that of the unclipped sample, which is also what the learner replays.
inline gae::RolloutBatch collect_worker(const Agent& agent, Worker& w, std::size_t horizon,
                                        std::vector<double>& finished) {
  gae::RolloutBatch batch;
  batch.steps.reserve(horizon);
  const auto& space = w.env->spec().action_space;
  for (std::size_t t = 0; t < horizon; ++t) {
    const auto dist = agent.policy.distribution(w.obs);
    const policy::ActionSample s = policy::sample(dist, w.rng);
    gae::RolloutStep step;
    step.state = w.obs;
    step.action = s.action;
    step.log_prob = s.log_prob;
    step.value = agent.value_of(w.obs);
    envs::Transition tr;
    try {
      tr = w.env->step(space.clip(s.action));
    } catch (const Error& e) {
      throw EnvError(fmt::format("env '{}' failed at rollout step {}: {}", w.env->id(), t, e.what()));
    }
    if (!std::isfinite(tr.reward)) throw EnvError(fmt::format("env '{}' produced a non-finite reward", w.env->id()));
    step.reward = tr.reward;
    step.done = tr.done;
    step.truncated = tr.truncated;
    w.episode_return += tr.reward;
    ++w.episode_length;
    if (tr.done || tr.truncated) {
      if (tr.truncated) step.truncation_value = agent.value_of(tr.next_state);
      finished.push_back(w.episode_return);
      w.episode_return = 0.0;
      w.episode_length = 0;
      w.obs = w.env->reset();
    } else {
      w.obs = tr.next_state;
    }
    batch.steps.push_back(std::move(step));
  }
  const auto& last = batch.steps.back();
  batch.bootstrap_value = (last.done || last.truncated) ? 0.0 : agent.value_of(w.obs);
  return batch;
}

inline Rollouts collect_rollouts(const Agent& agent, std::vector<Worker>& workers, std::size_t horizon,
                                 bool parallel = false) {
  Rollouts out;
  out.batches.resize(workers.size());
  std::vector<std::vector<double>> finished(workers.size());
  if (parallel && workers.size() > 1) {
    std::vector<std::exception_ptr> errors(workers.size());
    {
      std::vector<std::jthread> threads;
      threads.reserve(workers.size());
      for (std::size_t i = 0; i < workers.size(); ++i)
        threads.emplace_back([&, i] {
          try {
            out.batches[i] = collect_worker(agent, workers[i], horizon, finished[i]);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        });
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  } else {
    for (std::size_t i = 0; i < workers.size(); ++i)
      out.batches[i] = collect_worker(agent, workers[i], horizon, finished[i]);
  }
  for (auto& f : finished) out.finished_returns.insert(out.finished_returns.end(), f.begin(), f.end());
  return out;
}

// ---- update ------------------------------------------------------------------

/// Flattened, finalized batch the update consumes. Never modified by update().
struct TrainingBatch {
  std::vector<const gae::RolloutStep*> steps;
  Vector advantages;  // normalized if configured
  Vector returns;
};

inline TrainingBatch flatten(const std::vector<gae::RolloutBatch>& batches, bool normalize) {
  TrainingBatch tb;
  for (const auto& b : batches) {
    if (!b.advantages || !b.returns) throw SequencingError("update needs advantages and returns");
    for (std::size_t t = 0; t < b.steps.size(); ++t) {
      tb.steps.push_back(&b.steps[t]);
      tb.advantages.push_back((*b.advantages)[t]);
      tb.returns.push_back((*b.returns)[t]);
    }
  }
  if (tb.steps.empty()) throw EmptyBatchError("update on an empty batch");
  if (normalize) objectives::normalize_advantages(tb.advantages);
  return tb;
}

/// Gradients of one mini-batch loss, before any parameter moves.
struct MinibatchGradients {
  grad::GradBuffer policy;
  Vector log_std;
  grad::GradBuffer value;
  LossBreakdown loss;
  Vector ratios;
  double approx_kl = 0.0;  // mean of (r - 1) - log r
};

/// Loss and gradients over the samples at `indices`.
inline MinibatchGradients minibatch_gradients(const Agent& agent, const TrainingBatch& tb,
                                              std::span<const std::size_t> indices, const TrainConfig& cfg) {
  const double m = static_cast<double>(indices.size());
  if (indices.empty()) throw EmptyBatchError("empty mini-batch");
  MinibatchGradients g{grad::GradBuffer(agent.policy.net), Vector(agent.policy.log_std.size(), 0.0),
                       grad::GradBuffer(agent.value), {}, {}, 0.0};
  g.ratios.reserve(indices.size());
  double obj_sum = 0.0, ent_sum = 0.0, vsq_sum = 0.0, kl_sum = 0.0;
  grad::ForwardCache pcache, vcache;
  Vector out_grad;
  const bool gaussian = agent.policy.head == policy::HeadKind::Gaussian;

  for (std::size_t idx : indices) {
    const gae::RolloutStep& s = *tb.steps[idx];
    const double adv = tb.advantages[idx];

    grad::forward(agent.policy.net, s.state, pcache);
    const policy::PolicyDistribution dist = agent.policy.distribution_from_output(pcache.output());
    const double logp = policy::log_prob(dist, s.action);
    const double r = policy::ratio(logp, s.log_prob);
    g.ratios.push_back(r);
    obj_sum += objectives::objective(cfg.objective, r, adv, cfg.eps);
    ent_sum += policy::entropy(dist);
    kl_sum += (r - 1.0) - (logp - s.log_prob);

    // dL/dlogp = -(1/m) f'(r) r ; entropy enters with -c2/m.
    const double dlogp = -objectives::objective_grad(cfg.objective, r, adv, cfg.eps) * r / m;
    if (!gaussian) {
      const auto& cat = std::get<policy::Categorical>(dist);
      const Vector glp = policy::log_prob_grad_logits(cat, std::get<std::size_t>(s.action));
      const Vector gent = policy::entropy_grad_logits(cat);
      out_grad.resize(glp.size());
      for (std::size_t i = 0; i < glp.size(); ++i) out_grad[i] = dlogp * glp[i] - cfg.c2 / m * gent[i];
    } else {
      const auto& gauss = std::get<policy::DiagGaussian>(dist);
      const auto glp = policy::log_prob_grad(gauss, std::get<Vector>(s.action));
      out_grad.resize(glp.mean.size());
      for (std::size_t i = 0; i < glp.mean.size(); ++i) {
        out_grad[i] = dlogp * glp.mean[i];
        const double raw = agent.policy.log_std[i];
        const bool inside = raw >= policy::kLogStdMin && raw <= policy::kLogStdMax;
        if (inside) g.log_std[i] += dlogp * glp.log_std[i] - cfg.c2 / m;
      }
    }
    grad::accumulate_backward(agent.policy.net, pcache, out_grad, g.policy);

    grad::forward(agent.value, s.state, vcache);
    const double v = vcache.output()[0];
    const double diff = v - tb.returns[idx];
    vsq_sum += diff * diff;
    const double dv = cfg.c1 * diff / m;
    grad::accumulate_backward(agent.value, vcache, std::span<const double>(&dv, 1), g.value);
  }
  const double lp = -obj_sum / m;
  const double lv = vsq_sum / (2.0 * m);
  const double le = ent_sum / m;
  g.loss = objectives::make_breakdown(lp, lv, le, cfg.c1, cfg.c2, g.ratios, cfg.eps);
  g.approx_kl = kl_sum / m;
  return g;
}

namespace detail {

inline double grad_norm(const grad::GradBuffer& g, std::span<const double> extra = {}) {
  double s = 0.0;
  for (const auto& l : g.layers) {
    for (double x : l.weight.data) s += x * x;
    for (double x : l.bias) s += x * x;
  }
  for (double x : extra) s += x * x;
  return std::sqrt(s);
}

}  // namespace detail

inline void apply_gradients(Agent& agent, MinibatchGradients& g, double lr, const TrainConfig& cfg) {
  if (cfg.max_grad_norm > 0.0) {
    const double pn = detail::grad_norm(g.policy, g.log_std);
    if (pn > cfg.max_grad_norm) {
      const double s = cfg.max_grad_norm / pn;
      g.policy.scale(s);
      for (auto& x : g.log_std) x *= s;
    }
    const double vn = detail::grad_norm(g.value);
    if (vn > cfg.max_grad_norm) g.value.scale(cfg.max_grad_norm / vn);
  }
  grad::adam_step(agent.policy.net, g.policy, agent.policy_adam, lr);
  if (!agent.policy.log_std.empty()) {
    if (!grad::all_finite(g.log_std)) throw PoisonedGradientError(agent.policy.net.num_layers(), "log_std gradient");
    grad::detail::adam_block(agent.policy.log_std, g.log_std, agent.log_std_m, agent.log_std_v, lr,
                             agent.policy_adam.beta1, agent.policy_adam.beta2, agent.policy_adam.epsilon,
                             agent.policy_adam.step);
  }
  grad::adam_step(agent.value, g.value, agent.value_adam, lr);
}

struct UpdateResult {
  std::vector<LossBreakdown> per_epoch;  // mini-batch averages for each epoch run
  LossBreakdown final_batch;             // whole batch re-evaluated against pi_old after the last step
  double learning_rate = 0.0;            // possibly changed by adaptive_lr
  bool stopped_early = false;
};

/// Ratios of the current policy against the stored old log-probs.
inline Vector batch_ratios(const Agent& agent, const TrainingBatch& tb) {
  Vector r(tb.steps.size());
  for (std::size_t i = 0; i < tb.steps.size(); ++i) {
    const auto dist = agent.policy.distribution(tb.steps[i]->state);
    r[i] = policy::ratio(policy::log_prob(dist, tb.steps[i]->action), tb.steps[i]->log_prob);
  }
  return r;
}

/// Full-batch losses with the current parameters.
inline LossBreakdown evaluate_batch(const Agent& agent, const TrainingBatch& tb, const TrainConfig& cfg) {
  std::vector<std::size_t> all(tb.steps.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return minibatch_gradients(agent, tb, all, cfg).loss;
}

/// Epochs of shuffled mini-batch steps. Ratios are recomputed against the
/// frozen old log-probs for every mini-batch.
inline UpdateResult update(Agent& agent, const TrainingBatch& tb, const TrainConfig& cfg, double lr, Rng& shuffle_rng) {
  UpdateResult res;
  res.learning_rate = lr;
  const std::size_t n = tb.steps.size();
  if (n % cfg.num_minibatches != 0)
    throw ConfigError(fmt::format("batch of {} does not split into {} mini-batches", n, cfg.num_minibatches));
  const std::size_t mb = n / cfg.num_minibatches;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < cfg.update_epochs && !res.stopped_early; ++epoch) {
    shuffle(order, shuffle_rng);
    LossBreakdown acc{};
    double kl_acc = 0.0;
    for (std::size_t k = 0; k < cfg.num_minibatches; ++k) {
      const std::span<const std::size_t> idx(order.data() + k * mb, mb);
      MinibatchGradients g = minibatch_gradients(agent, tb, idx, cfg);
      if (!std::isfinite(g.loss.total)) throw NonFiniteLossError(epoch, k);
      apply_gradients(agent, g, res.learning_rate, cfg);
      acc.policy_loss += g.loss.policy_loss;
      acc.value_loss += g.loss.value_loss;
      acc.entropy += g.loss.entropy;
      acc.total += g.loss.total;
      acc.mean_ratio_deviation += g.loss.mean_ratio_deviation;
      acc.clip_fraction += g.loss.clip_fraction;
      kl_acc += g.approx_kl;
    }
    const double k = static_cast<double>(cfg.num_minibatches);
    acc.policy_loss /= k;
    acc.value_loss /= k;
    acc.entropy /= k;
    acc.total /= k;
    acc.mean_ratio_deviation /= k;
    acc.clip_fraction /= k;
    res.per_epoch.push_back(acc);
    const double kl = kl_acc / k;
    if (cfg.target_kl > 0.0) {
      if (cfg.adaptive_lr) {
        if (kl > 2.0 * cfg.target_kl) res.learning_rate /= 1.5;
        else if (kl < 0.5 * cfg.target_kl) res.learning_rate *= 1.5;
      } else if (kl > cfg.target_kl) {
        res.stopped_early = true;
      }
    }
  }
  res.final_batch = evaluate_batch(agent, tb, cfg);
  return res;
}

// ---- metrics and checkpoints -------------------------------------------------

struct MetricsRecord {
  std::uint64_t global_step = 0;
  double mean_episode_return = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double mean_ratio_deviation = 0.0;
  double max_ratio_deviation_so_far = 0.0;
  double clip_fraction = 0.0;
  double learning_rate = 0.0;
  double wall_time = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "global_step,mean_episode_return,policy_loss,value_loss,entropy,mean_ratio_deviation,"
    "max_ratio_deviation_so_far,clip_fraction,learning_rate,wall_time";

/// One CSV row; doubles use the shortest round-trip representation.
inline std::string to_csv_row(const MetricsRecord& r) {
  return fmt::format("{},{},{},{},{},{},{},{},{},{}", r.global_step, r.mean_episode_return, r.policy_loss,
                     r.value_loss, r.entropy, r.mean_ratio_deviation, r.max_ratio_deviation_so_far, r.clip_fraction,
                     r.learning_rate, r.wall_time);
}

/// Linear decay to zero over total_steps, evaluated at the start of a phase.
inline double learning_rate_at(const TrainConfig& cfg, std::uint64_t global_step) {
  if (!cfg.lr_decay) return cfg.learning_rate;
  const double frac = 1.0 - static_cast<double>(global_step) / static_cast<double>(cfg.total_steps);
  return cfg.learning_rate * frac;
}

inline nlohmann::json checkpoint_json(const Agent& agent, const TrainConfig& cfg, std::uint64_t global_step) {
  nlohmann::json j;
  j["format"] = "spolab-checkpoint-v1";
  j["env_id"] = cfg.env_id;
  j["global_step"] = global_step;
  j["policy"] = grad::to_json(agent.policy.net, agent.policy_adam);
  j["policy_head"] = agent.policy.head == policy::HeadKind::Categorical ? "categorical" : "gaussian";
  j["log_std"] = agent.policy.log_std;
  j["log_std_adam"] = {{"m", agent.log_std_m}, {"v", agent.log_std_v}};
  j["value"] = grad::to_json(agent.value, agent.value_adam);
  j["config"] = to_toml(cfg);
  return j;
}

struct LoadedCheckpoint {
  Agent agent;
  TrainConfig config;
  std::uint64_t global_step = 0;
};

inline LoadedCheckpoint load_checkpoint(const nlohmann::json& j) {
  LoadedCheckpoint out;
  out.config = resolve_config(parse_kv_text(j.at("config").get<std::string>()), {});
  out.global_step = j.at("global_step").get<std::uint64_t>();
  auto p = grad::from_json(j.at("policy"));
  out.agent.policy.net = std::move(p.params);
  out.agent.policy_adam = std::move(p.adam);
  out.agent.policy.head =
      j.at("policy_head").get<std::string>() == "categorical" ? policy::HeadKind::Categorical : policy::HeadKind::Gaussian;
  out.agent.policy.log_std = j.at("log_std").get<Vector>();
  out.agent.log_std_m = j.at("log_std_adam").at("m").get<Vector>();
  out.agent.log_std_v = j.at("log_std_adam").at("v").get<Vector>();
  auto v = grad::from_json(j.at("value"));
  out.agent.value = std::move(v.params);
  out.agent.value_adam = std::move(v.adam);
  return out;
}

inline LoadedCheckpoint load_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read checkpoint '" + path.string() + "'");
  return load_checkpoint(nlohmann::json::parse(in));
}

// ---- training driver ---------------------------------------------------------

/// Owns the agent, workers and RNG streams of one run. step_phase() performs
/// one collection + update cycle.
class Trainer {
 public:
  explicit Trainer(TrainConfig cfg) : cfg_(std::move(cfg)) {
    validate(cfg_);
    workers_ = make_workers(cfg_);
    agent_ = make_agent(cfg_, workers_.front().env->spec());
    shuffle_rng_ = Rng::stream(cfg_.seed, kShuffleStream);
    lr_scale_ = 1.0;
    start_ = std::chrono::steady_clock::now();
  }

  const TrainConfig& config() const { return cfg_; }
  const Agent& agent() const { return agent_; }
  Agent& agent() { return agent_; }
  std::uint64_t global_step() const { return global_step_; }
  bool finished() const { return global_step_ >= cfg_.total_steps; }
  std::size_t phases_done() const { return phases_; }
  std::size_t total_phases() const { return (cfg_.total_steps + cfg_.batch_size() - 1) / cfg_.batch_size(); }

  /// Collects rollouts and finalizes advantages/returns with V_old.
  Rollouts collect() {
    Rollouts r = collect_rollouts(agent_, workers_, cfg_.horizon, cfg_.parallel_rollouts);
    for (auto& b : r.batches) gae::finalize(b, cfg_.gamma, cfg_.lambda);
    return r;
  }

  MetricsRecord step_phase() {
    const double lr = learning_rate_at(cfg_, global_step_) * lr_scale_;
    Rollouts ro = collect();
    global_step_ += cfg_.batch_size();
    const TrainingBatch tb = flatten(ro.batches, cfg_.advantage_norm);
    const UpdateResult up = update(agent_, tb, cfg_, lr, shuffle_rng_);
    if (cfg_.adaptive_lr) lr_scale_ *= up.learning_rate / lr;
    ++phases_;

    MetricsRecord rec;
    rec.global_step = global_step_;
    if (!ro.finished_returns.empty())
      last_return_ = std::accumulate(ro.finished_returns.begin(), ro.finished_returns.end(), 0.0) /
                     static_cast<double>(ro.finished_returns.size());
    rec.mean_episode_return = last_return_;
    const LossBreakdown& last = up.per_epoch.back();
    rec.policy_loss = last.policy_loss;
    rec.value_loss = last.value_loss;
    rec.entropy = last.entropy;
    rec.mean_ratio_deviation = up.final_batch.mean_ratio_deviation;
    max_dev_ = std::max(max_dev_, rec.mean_ratio_deviation);
    rec.max_ratio_deviation_so_far = max_dev_;
    rec.clip_fraction = up.final_batch.clip_fraction;
    rec.learning_rate = lr;
    rec.wall_time =
        cfg_.log_wall_time ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count() : 0.0;
    return rec;
  }

  nlohmann::json checkpoint() const { return checkpoint_json(agent_, cfg_, global_step_); }

 private:
  TrainConfig cfg_;
  std::vector<Worker> workers_;
  Agent agent_;
  Rng shuffle_rng_;
  std::uint64_t global_step_ = 0;
  std::size_t phases_ = 0;
  double last_return_ = 0.0;
  double max_dev_ = 0.0;
  double lr_scale_ = 1.0;
  std::chrono::steady_clock::time_point start_;
};

struct TrainOutputs {
  std::vector<MetricsRecord> records;
  nlohmann::json final_checkpoint;
};

/// Runs until total_steps env steps are consumed. When `run_dir` is given,
/// writes metrics.csv (appended per phase), checkpoint.json (every
/// checkpoint_every phases and at the end) and resolved.toml.
inline TrainOutputs train(const TrainConfig& cfg, const std::optional<std::filesystem::path>& run_dir = std::nullopt,
                          const std::function<void(const MetricsRecord&)>& on_record = {}) {
  Trainer t(cfg);
  TrainOutputs out;
  std::ofstream metrics;
  auto write_checkpoint = [&] {
    if (!run_dir) return;
    std::ofstream ck(*run_dir / "checkpoint.json");
    ck << t.checkpoint().dump() << '\n';
  };
  if (run_dir) {
    std::filesystem::create_directories(*run_dir);
    std::ofstream(*run_dir / "resolved.toml") << to_toml(cfg);
    metrics.open(*run_dir / "metrics.csv");
    metrics << kMetricsHeader << '\n';
  }
  while (!t.finished()) {
    MetricsRecord rec = t.step_phase();
    if (metrics.is_open()) metrics << to_csv_row(rec) << '\n' << std::flush;
    if (on_record) on_record(rec);
    out.records.push_back(rec);
    if (t.phases_done() % cfg.checkpoint_every == 0) write_checkpoint();
  }
  write_checkpoint();
  out.final_checkpoint = t.checkpoint();
  return out;
}

// ---- evaluation --------------------------------------------------------------

struct EvalResult {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> returns;
};

/// Runs the greedy (mode) policy for `episodes` episodes.
inline EvalResult evaluate(const policy::PolicyModel& pol, std::string_view env_id, std::size_t episodes,
                           std::uint64_t seed) {
  if (episodes == 0) throw ConfigError("episodes must be positive");
  auto env = envs::make_env(env_id);
  const auto& spec = env->spec();
  if (pol.net.input_size() != spec.observation_dim || pol.net.output_size() != spec.action_space.n)
    throw ShapeError(fmt::format("checkpoint network {}->{} does not fit env '{}' ({}->{})", pol.net.input_size(),
                                 pol.net.output_size(), env_id, spec.observation_dim, spec.action_space.n));
  EvalResult res;
  for (std::size_t e = 0; e < episodes; ++e) {
    Vector obs = env->reset(Rng::stream(seed, e).next_u64());
    double total = 0.0;
    for (;;) {
      const auto tr = env->step(spec.action_space.clip(policy::mode(pol.distribution(obs))));
      total += tr.reward;
      if (tr.done || tr.truncated) break;
      obs = tr.next_state;
    }
    res.returns.push_back(total);
  }
  const double n = static_cast<double>(episodes);
  res.mean = std::accumulate(res.returns.begin(), res.returns.end(), 0.0) / n;
  double var = 0.0;
  for (double r : res.returns) var += (r - res.mean) * (r - res.mean);
  res.stddev = std::sqrt(var / n);
  return res;
}

}  // namespace spolab::trainer
