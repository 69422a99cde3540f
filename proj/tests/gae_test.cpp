#include <gtest/gtest.h>

#include <vector>

#include "spolab/errors.hpp"
#include "spolab/gae.hpp"
#include "spolab/oracles.hpp"
#include "spolab/verify.hpp"

using namespace spolab;
using namespace spolab::gae;

namespace {

RolloutBatch make(const std::vector<double>& rewards, const std::vector<double>& values,
                  const std::vector<bool>& dones, double bootstrap) {
  RolloutBatch b;
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    RolloutStep s;
    s.reward = rewards[t];
    s.value = values[t];
    s.done = dones[t];
    b.steps.push_back(s);
  }
  b.bootstrap_value = bootstrap;
  return b;
}

}  // namespace

TEST(Gae, SingleTerminalStep) {
  auto b = make({1.0}, {0.0}, {true}, 123.0);
  finalize(b, 0.99, 0.95);
  EXPECT_EQ((*b.advantages)[0], 1.0);
  EXPECT_EQ((*b.returns)[0], 1.0);
}

TEST(Gae, LambdaZeroIsOneStepTd) {
  auto b = make({1.0, 2.0, 3.0}, {0.5, 0.1, -0.2}, {false, false, false}, 0.7);
  const auto a = compute_gae(b, 0.9, 0.0);
  EXPECT_DOUBLE_EQ(a[0], 1.0 + 0.9 * 0.1 - 0.5);
  EXPECT_DOUBLE_EQ(a[1], 2.0 + 0.9 * -0.2 - 0.1);
  EXPECT_DOUBLE_EQ(a[2], 3.0 + 0.9 * 0.7 + 0.2);
}

TEST(Gae, DoneCutsAccumulation) {
  auto b = make({1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}, {false, true, false}, 10.0);
  const auto a = compute_gae(b, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(a[2], 11.0);
  EXPECT_DOUBLE_EQ(a[1], 1.0);
  EXPECT_DOUBLE_EQ(a[0], 2.0);
}

TEST(Gae, TruncationBootstrapsFromStoredValue) {
  auto b = make({1.0, 1.0}, {0.0, 0.0}, {false, false}, 0.0);
  b.steps[0].truncated = true;
  b.steps[0].truncation_value = 5.0;
  const auto a = compute_gae(b, 0.5, 1.0);
  EXPECT_DOUBLE_EQ(a[0], 1.0 + 0.5 * 5.0);  // no accumulation across the cut
  EXPECT_DOUBLE_EQ(a[1], 1.0);
}

TEST(Gae, MatchesDoubleLoopOracle) {
  const auto r = verify::gae_oracle(1000, 1e-10);
  EXPECT_TRUE(r.passed) << r.max_error;
}

TEST(Gae, Errors) {
  RolloutBatch empty;
  EXPECT_THROW(compute_gae(empty, 0.99, 0.95), EmptyBatchError);
  auto b = make({1.0}, {0.0}, {false}, 0.0);
  EXPECT_THROW(compute_gae(b, 1.5, 0.95), ConfigError);
  EXPECT_THROW(compute_gae(b, 0.99, -0.1), ConfigError);
}

TEST(Returns, ZeroAdvantagesGiveValues) {
  auto b = make({0.0, 0.0}, {1.5, -2.0}, {false, false}, 0.0);
  b.advantages = std::vector<double>{0.0, 0.0};
  EXPECT_EQ(compute_returns(b), (std::vector<double>{1.5, -2.0}));
}

TEST(Returns, Arithmetic) {
  auto b = make({0.0, 0.0}, {1.0, 2.0}, {false, false}, 0.0);
  b.advantages = std::vector<double>{0.5, -0.5};
  EXPECT_EQ(compute_returns(b), (std::vector<double>{1.5, 1.5}));
}

TEST(Returns, RewardToGoWhenLambdaAndGammaAreOne) {
  const std::vector<double> rewards{1.0, -2.0, 0.5, 4.0, 3.0};
  auto b = make(rewards, std::vector<double>(5, 0.0), {false, false, false, false, true}, 0.0);
  finalize(b, 1.0, 1.0);
  const auto oracle = oracles::discounted_returns(rewards, 1.0, 0.0);
  for (std::size_t t = 0; t < 5; ++t) EXPECT_DOUBLE_EQ((*b.returns)[t], oracle[t]);
}

TEST(Returns, RequireAdvantagesFirst) {
  auto b = make({1.0}, {0.0}, {false}, 0.0);
  EXPECT_THROW(compute_returns(b), SequencingError);
}
