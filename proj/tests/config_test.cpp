#include <gtest/gtest.h>

#include <string>

#include "spolab/config.hpp"
#include "spolab/errors.hpp"

using namespace spolab;

namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Defaults, DiscreteColumn) {
  const auto c = default_config("cartpole");
  EXPECT_EQ(c.num_workers, 8u);
  EXPECT_EQ(c.horizon, 128u);
  EXPECT_EQ(c.learning_rate, 2.5e-4);
  EXPECT_EQ(c.update_epochs, 4u);
  EXPECT_EQ(c.num_minibatches, 4u);
  EXPECT_EQ(c.gamma, 0.99);
  EXPECT_EQ(c.lambda, 0.95);
  EXPECT_EQ(c.c1, 0.5);
  EXPECT_EQ(c.c2, 0.01);
  EXPECT_EQ(c.eps, 0.2);
  EXPECT_EQ(c.objective, objectives::ObjectiveKind::Spo);
  EXPECT_EQ(c.batch_size(), 1024u);
  EXPECT_EQ(c.minibatch_size(), 256u);
  EXPECT_EQ(c.max_grad_norm, 0.0);
  EXPECT_EQ(c.target_kl, 0.0);
  EXPECT_FALSE(c.adaptive_lr);
  EXPECT_EQ(c.checkpoint_every, 10u);
}

TEST(Defaults, ContinuousColumn) {
  const auto c = default_config("pointmass");
  EXPECT_EQ(c.horizon, 256u);
  EXPECT_EQ(c.learning_rate, 3e-4);
  EXPECT_EQ(c.update_epochs, 10u);
  EXPECT_EQ(c.c2, 0.0);
  EXPECT_EQ(c.batch_size(), 2048u);
}

TEST(Parse, FlatTextWithCommentsAndUnderscores) {
  const auto kv = parse_kv_text(
      "# run\nenv_id = \"cartpole\"  # trailing\n\nobjective = \"ppo_clip\"\ntotal_steps = 300_000\n"
      "hidden_sizes = [32, 16]\nlr_decay = false\n");
  const auto c = resolve_config(kv, {});
  EXPECT_EQ(c.env_id, "cartpole");
  EXPECT_EQ(c.objective, objectives::ObjectiveKind::PpoClip);
  EXPECT_EQ(c.total_steps, 300000u);
  EXPECT_EQ(c.hidden_sizes, (std::vector<std::size_t>{32, 16}));
  EXPECT_FALSE(c.lr_decay);
}

TEST(Parse, ExponentIntegers) {
  const auto c = resolve_config({{"env_id", "cartpole"}, {"total_steps", "3e5"}}, {});
  EXPECT_EQ(c.total_steps, 300000u);
  EXPECT_EQ(resolve_config({{"env_id", "cartpole"}, {"total_steps", "1.5e3"}}, {}).total_steps, 1500u);
  EXPECT_THROW(resolve_config({{"env_id", "cartpole"}, {"total_steps", "2.5e0"}}, {}), ConfigError);
}

TEST(Parse, TablesRejected) { EXPECT_THROW(parse_kv_text("[trainer]\nseed = 1\n"), ConfigError); }

TEST(Parse, MalformedLines) {
  EXPECT_THROW(parse_kv_text("seed 1\n"), ConfigError);
  EXPECT_THROW(parse_override("seed"), ConfigError);
}

TEST(Resolve, OverridesBeatFileBeatDefaults) {
  const auto c = resolve_config({{"env_id", "\"cartpole\""}, {"seed", "3"}, {"learning_rate", "1e-3"}},
                                {{"seed", "7"}});
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.learning_rate, 1e-3);
  EXPECT_EQ(c.horizon, 128u);
}

TEST(Resolve, EnvOverridePicksItsDefaults) {
  const auto c = resolve_config({{"env_id", "cartpole"}}, {{"env_id", "pointmass"}});
  EXPECT_EQ(c.env_id, "pointmass");
  EXPECT_EQ(c.horizon, 256u);
}

TEST(Resolve, ObjectiveOverrideChangesOnlyTheObjective) {
  const std::vector<std::pair<std::string, std::string>> file{{"env_id", "cartpole"}, {"seed", "2"}};
  const auto a = resolve_config(file, {});
  const auto b = resolve_config(file, {{"objective", "ppo_clip"}});
  auto b_as_a = b;
  b_as_a.objective = a.objective;
  EXPECT_EQ(to_toml(b_as_a), to_toml(a));
  EXPECT_NE(to_toml(a), to_toml(b));
}

TEST(Resolve, MissingEnvIdNamesTheField) {
  const auto msg = error_of([] { resolve_config({{"seed", "1"}}, {}); });
  EXPECT_NE(msg.find("env_id"), std::string::npos) << msg;
}

TEST(Resolve, UnknownKeyFailsBeforeAnythingElse) {
  const auto msg = error_of([] { resolve_config({{"seed", "1"}}, {{"lerning_rate", "1"}}); });
  EXPECT_NE(msg.find("lerning_rate"), std::string::npos) << msg;
}

TEST(Validate, MessagesNameTheField) {
  auto expect_field = [](const char* key, const char* value) {
    const auto msg = error_of([&] { resolve_config({{"env_id", "cartpole"}, {key, value}}, {}); });
    EXPECT_NE(msg.find(key), std::string::npos) << key << ": " << msg;
  };
  expect_field("eps", "0");
  expect_field("num_minibatches", "3");
  expect_field("total_steps", "10");
  expect_field("gamma", "1.5");
  expect_field("learning_rate", "-1");
  expect_field("hidden_sizes", "[64, 0]");
  expect_field("objective", "\"trpo\"");
  expect_field("lr_decay", "yes");
  expect_field("seed", "-1");
}

TEST(Validate, UnknownEnv) { EXPECT_THROW(resolve_config({{"env_id", "atari"}}, {}), ConfigError); }

TEST(Toml, RoundTripIsExact) {
  auto c = default_config("pointmass");
  c.eps = 0.15;
  c.learning_rate = 1.0 / 3.0;
  c.seed = 12345;
  c.hidden_sizes = {7, 9, 11};
  c.objective = objectives::ObjectiveKind::SimpleAligned;
  c.max_grad_norm = 0.5;
  c.log_wall_time = true;
  const auto text = to_toml(c);
  const auto back = resolve_config(parse_kv_text(text), {});
  EXPECT_EQ(to_toml(back), text);
  EXPECT_EQ(back.learning_rate, c.learning_rate);
  EXPECT_EQ(back.hidden_sizes, c.hidden_sizes);
}

TEST(Files, ShippedConfigsLoad) {
  for (const char* name : {"cartpole_spo.toml", "cartpole_ppo.toml", "pointmass_spo.toml"}) {
    const auto c = load_config_file(std::string(SPOLAB_SOURCE_DIR) + "/configs/" + name);
    EXPECT_FALSE(c.env_id.empty()) << name;
  }
  EXPECT_THROW(load_config_file("/nonexistent/file.toml"), ConfigError);
}
