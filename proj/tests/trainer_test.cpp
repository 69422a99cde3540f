#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "spolab/config.hpp"
#include "spolab/errors.hpp"
#include "spolab/oracles.hpp"
#include "spolab/trainer.hpp"

using namespace spolab;
using namespace spolab::trainer;

namespace {

TrainConfig small_config(const std::string& env = "gridmdp") {
  auto c = default_config(env);
  c.num_workers = 2;
  c.horizon = 16;
  c.num_minibatches = 2;
  c.total_steps = 32 * 3;
  c.hidden_sizes = {8};
  c.seed = 5;
  return c;
}

struct Fixture {
  TrainConfig cfg;
  std::vector<Worker> workers;
  Agent agent;
  Rollouts ro;
  TrainingBatch tb;

  explicit Fixture(TrainConfig c) : cfg(std::move(c)) {
    workers = make_workers(cfg);
    agent = make_agent(cfg, workers.front().env->spec());
    ro = collect_rollouts(agent, workers, cfg.horizon);
    for (auto& b : ro.batches) gae::finalize(b, cfg.gamma, cfg.lambda);
    tb = flatten(ro.batches, cfg.advantage_norm);
  }
};

std::vector<std::size_t> all_indices(const TrainingBatch& tb) {
  std::vector<std::size_t> idx(tb.steps.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Collect, HorizonOneSingleWorker) {
  auto c = small_config();
  c.num_workers = 1;
  c.horizon = 1;
  c.num_minibatches = 1;
  c.total_steps = 1;
  auto workers = make_workers(c);
  const auto agent = make_agent(c, workers.front().env->spec());
  const auto ro = collect_rollouts(agent, workers, 1);
  ASSERT_EQ(ro.batches.size(), 1u);
  EXPECT_EQ(ro.batches[0].size(), 1u);
}

TEST(Collect, BitIdenticalAcrossRuns) {
  const Fixture a(small_config()), b(small_config());
  for (std::size_t w = 0; w < a.ro.batches.size(); ++w) {
    const auto &x = a.ro.batches[w], &y = b.ro.batches[w];
    ASSERT_EQ(x.size(), y.size());
    for (std::size_t t = 0; t < x.size(); ++t) {
      EXPECT_EQ(x.steps[t].state, y.steps[t].state);
      EXPECT_EQ(x.steps[t].action, y.steps[t].action);
      EXPECT_EQ(x.steps[t].log_prob, y.steps[t].log_prob);
      EXPECT_EQ(x.steps[t].value, y.steps[t].value);
    }
    EXPECT_EQ(*x.advantages, *y.advantages);
  }
}

TEST(Collect, ParallelMatchesSerial) {
  auto c = small_config("cartpole");
  auto w1 = make_workers(c), w2 = make_workers(c);
  const auto agent = make_agent(c, w1.front().env->spec());
  const auto a = collect_rollouts(agent, w1, 64, false);
  const auto b = collect_rollouts(agent, w2, 64, true);
  for (std::size_t w = 0; w < a.batches.size(); ++w)
    for (std::size_t t = 0; t < 64; ++t) EXPECT_EQ(a.batches[w].steps[t].log_prob, b.batches[w].steps[t].log_prob);
  EXPECT_EQ(a.finished_returns, b.finished_returns);
}

TEST(Collect, StoredLogProbMatchesPolicy) {
  const Fixture f(small_config("pointmass"));
  for (const auto* s : f.tb.steps)
    EXPECT_DOUBLE_EQ(s->log_prob, policy::log_prob(f.agent.policy.distribution(s->state), s->action));
}

TEST(Update, FirstMinibatchRatiosAreOne) {
  const Fixture f(small_config());
  const auto idx = all_indices(f.tb);
  const auto g = minibatch_gradients(f.agent, f.tb, idx, f.cfg);
  for (double r : g.ratios) EXPECT_EQ(r, 1.0);
}

TEST(Update, ZeroAdvantagesLeaveParametersUnchanged) {
  auto c = small_config();
  c.c1 = 0.0;
  c.c2 = 0.0;
  Fixture f(c);
  std::fill(f.tb.advantages.begin(), f.tb.advantages.end(), 0.0);
  const auto before = f.agent;
  Rng rng(1);
  update(f.agent, f.tb, c, 1e-2, rng);
  EXPECT_EQ(f.agent.policy.net.layers, before.policy.net.layers);
  EXPECT_EQ(f.agent.value.layers, before.value.layers);
}

TEST(Update, OneEpochOneMinibatchReportsPreUpdateLosses) {
  auto c = small_config();
  c.update_epochs = 1;
  c.num_minibatches = 1;
  Fixture f(c);
  const auto direct = evaluate_batch(f.agent, f.tb, c);
  Rng rng(2);
  const auto res = update(f.agent, f.tb, c, 1e-3, rng);
  ASSERT_EQ(res.per_epoch.size(), 1u);
  // Same samples in shuffled order, so only summation order differs.
  EXPECT_NEAR(res.per_epoch[0].policy_loss, direct.policy_loss, 1e-12);
  EXPECT_NEAR(res.per_epoch[0].value_loss, direct.value_loss, 1e-12);
  EXPECT_NEAR(res.per_epoch[0].entropy, direct.entropy, 1e-12);
  EXPECT_NEAR(res.per_epoch[0].total, direct.total, 1e-12);
}

TEST(Update, PolicyAndValueGradientsAreDisjoint) {
  auto c = small_config();
  Fixture f(c);
  const auto idx = all_indices(f.tb);
  // Only the value term: the policy gradient must vanish.
  auto cv = c;
  cv.c2 = 0.0;
  auto tb0 = f.tb;
  std::fill(tb0.advantages.begin(), tb0.advantages.end(), 0.0);
  const auto gv = minibatch_gradients(f.agent, tb0, idx, cv);
  EXPECT_TRUE(gv.policy.is_zero());
  EXPECT_FALSE(gv.value.is_zero());
  // Only the policy terms: the value gradient must vanish.
  auto cp = c;
  cp.c1 = 0.0;
  const auto gp = minibatch_gradients(f.agent, f.tb, idx, cp);
  EXPECT_TRUE(gp.value.is_zero());
  EXPECT_FALSE(gp.policy.is_zero());
}

TEST(Update, OldLogProbsAreFrozen) {
  Fixture f(small_config());
  std::vector<double> stored;
  for (const auto* s : f.tb.steps) stored.push_back(s->log_prob);
  for (auto& l : f.agent.policy.net.layers)
    for (auto& w : l.weight.data) w += 0.05;
  const auto r = batch_ratios(f.agent, f.tb);
  for (std::size_t i = 0; i < stored.size(); ++i) EXPECT_EQ(f.tb.steps[i]->log_prob, stored[i]);
  EXPECT_GT(divergence::ratio_deviation(r), 0.0);
  Rng rng(3);
  update(f.agent, f.tb, f.cfg, 1e-3, rng);
  for (std::size_t i = 0; i < stored.size(); ++i) EXPECT_EQ(f.tb.steps[i]->log_prob, stored[i]);
}

TEST(Update, PolicyGradientMatchesFiniteDifferencesOfTheLoss) {
  for (const char* env : {"gridmdp", "pointmass"}) {
    auto c = small_config(env);
    c.horizon = c.continuous() ? 32 : 16;
    c.c2 = 0.05;
    Fixture f(c);
    // The value term does not depend on the policy; leaving it out of the
    // probed loss keeps its roundoff out of the finite differences.
    c.c1 = 0.0;
    // Move away from r = 1 so the objective's curvature matters.
    for (auto& l : f.agent.policy.net.layers)
      for (auto& w : l.weight.data) w *= 3.0;
    for (auto& s : f.agent.policy.log_std) s = -0.3;
    const auto idx = all_indices(f.tb);
    const auto g = minibatch_gradients(f.agent, f.tb, idx, c);
    auto loss_at = [&](Agent& a) { return minibatch_gradients(a, f.tb, idx, c).loss.total; };
    Agent probe = f.agent;
    for (std::size_t k = 0; k < probe.policy.net.layers.size(); ++k) {
      auto& data = probe.policy.net.layers[k].weight.data;
      for (std::size_t i = 0; i < data.size(); i += 3) {
        const double orig = data[i];
        const double fd = oracles::central_difference(
            [&](double v) {
              data[i] = v;
              return loss_at(probe);
            },
            orig, 1e-6);
        data[i] = orig;
        EXPECT_LT(oracles::relative_error(g.policy.layers[k].weight.data[i], fd, 1e-6), 1e-4)
            << env << " layer " << k << " i " << i << " analytic " << g.policy.layers[k].weight.data[i] << " fd " << fd;
      }
    }
    for (std::size_t i = 0; i < probe.policy.log_std.size(); ++i) {
      const double orig = probe.policy.log_std[i];
      const double fd = oracles::central_difference(
          [&](double v) {
            probe.policy.log_std[i] = v;
            return loss_at(probe);
          },
          orig, 1e-6);
      probe.policy.log_std[i] = orig;
      EXPECT_LT(oracles::relative_error(g.log_std[i], fd, 1e-6), 1e-4);
    }
  }
}

TEST(Update, NonFiniteLossIsReported) {
  Fixture f(small_config());
  f.tb.advantages[0] = std::nan("");
  Rng rng(4);
  try {
    update(f.agent, f.tb, f.cfg, 1e-3, rng);
    FAIL() << "expected NonFiniteLossError";
  } catch (const NonFiniteLossError& e) {
    EXPECT_EQ(e.epoch(), 0u);
  }
}

TEST(Update, TargetKlStopsEarly) {
  auto c = small_config();
  c.target_kl = 1e-12;
  c.update_epochs = 5;
  Fixture f(c);
  Rng rng(5);
  const auto res = update(f.agent, f.tb, c, 1e-2, rng);
  EXPECT_TRUE(res.stopped_early);
  EXPECT_EQ(res.per_epoch.size(), 1u);
}

TEST(Schedule, LinearDecay) {
  auto c = default_config("cartpole");
  c.total_steps = 1000;
  c.learning_rate = 1.0;
  EXPECT_EQ(learning_rate_at(c, 0), 1.0);
  EXPECT_EQ(learning_rate_at(c, 250), 0.75);
  c.lr_decay = false;
  EXPECT_EQ(learning_rate_at(c, 999), 1.0);
}

TEST(Train, ExactlyOneCycle) {
  auto c = small_config();
  c.total_steps = c.batch_size();
  const auto out = train(c);
  ASSERT_EQ(out.records.size(), 1u);
  EXPECT_EQ(out.records[0].global_step, c.batch_size());
}

TEST(Train, RunDirectoryContents) {
  const auto dir = std::filesystem::temp_directory_path() / "spolab_trainer_run";
  std::filesystem::remove_all(dir);
  auto c = small_config();
  c.checkpoint_every = 2;
  train(c, dir);
  EXPECT_TRUE(std::filesystem::exists(dir / "checkpoint.json"));
  EXPECT_EQ(read_file(dir / "resolved.toml"), to_toml(c));
  const auto csv = read_file(dir / "metrics.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kMetricsHeader);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  std::filesystem::remove_all(dir);
}

TEST(Train, DeterministicMetrics) {
  auto c = small_config("cartpole");
  c.total_steps = 32 * 4;
  const auto a = train(c), b = train(c);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_EQ(to_csv_row(a.records[i]), to_csv_row(b.records[i]));
  EXPECT_EQ(a.final_checkpoint.dump(), b.final_checkpoint.dump());
}

TEST(Train, MaxDeviationIsRunningMax) {
  auto c = small_config("cartpole");
  c.total_steps = 32 * 6;
  const auto out = train(c);
  double m = 0.0;
  for (const auto& r : out.records) {
    m = std::max(m, r.mean_ratio_deviation);
    EXPECT_EQ(r.max_ratio_deviation_so_far, m);
    EXPECT_EQ(r.wall_time, 0.0);
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  for (const char* env : {"cartpole", "pointmass"}) {
    auto c = small_config(env);
    c.total_steps = 2 * c.batch_size();
    const auto out = train(c);
    const auto loaded = load_checkpoint(nlohmann::json::parse(out.final_checkpoint.dump()));
    EXPECT_EQ(loaded.global_step, 2 * c.batch_size());
    EXPECT_EQ(to_toml(loaded.config), to_toml(c));
    EXPECT_EQ(checkpoint_json(loaded.agent, loaded.config, loaded.global_step).dump(), out.final_checkpoint.dump());
  }
}

TEST(Eval, UntrainedCartpoleIsNearRandom) {
  auto c = default_config("cartpole");
  auto workers = make_workers(c);
  const auto agent = make_agent(c, workers.front().env->spec());
  const auto res = evaluate(agent.policy, "cartpole", 100, 0);
  EXPECT_LT(res.mean, 50.0);
  EXPECT_EQ(res.returns.size(), 100u);
}

TEST(Eval, SingleEpisodeHasZeroStdAndIsDeterministic) {
  auto c = default_config("pointmass");
  auto workers = make_workers(c);
  const auto agent = make_agent(c, workers.front().env->spec());
  const auto a = evaluate(agent.policy, "pointmass", 1, 3);
  EXPECT_EQ(a.stddev, 0.0);
  EXPECT_EQ(evaluate(agent.policy, "pointmass", 5, 9).returns, evaluate(agent.policy, "pointmass", 5, 9).returns);
}

TEST(Eval, ShapeMismatch) {
  auto c = default_config("cartpole");
  auto workers = make_workers(c);
  const auto agent = make_agent(c, workers.front().env->spec());
  EXPECT_THROW(evaluate(agent.policy, "gridmdp", 1, 0), ShapeError);
}
