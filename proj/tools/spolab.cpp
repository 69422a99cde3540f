// spolab: train, bench, verify, eval, export.
//
// Exit codes: 0 ok, 1 property failure, 2 usage or config error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "spolab/bench.hpp"
#include "spolab/config.hpp"
#include "spolab/errors.hpp"
#include "spolab/trainer.hpp"
#include "spolab/verify.hpp"

namespace fs = std::filesystem;
using namespace spolab;

namespace {

constexpr int kOk = 0;
constexpr int kPropertyFailure = 1;
constexpr int kUsageError = 2;

fs::path output_root() {
  if (const char* env = std::getenv("SPO_LAB_OUT"); env && *env) return env;
  return "runs";
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = config_detail::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct TrainArgs {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  std::vector<std::pair<std::string, std::string>> overrides;
  for (const auto& s : a.sets) overrides.push_back(parse_override(s));
  const TrainConfig cfg = a.config.empty() ? resolve_config({}, overrides) : load_config_file(a.config, overrides);

  fs::path run_dir;
  if (!a.out.empty()) {
    run_dir = a.out;
  } else {
    const std::string stem = a.config.empty() ? cfg.env_id : fs::path(a.config).stem().string();
    run_dir = output_root() / fmt::format("{}_{}_seed{}", stem, objectives::to_string(cfg.objective), cfg.seed);
  }

  fmt::print("run directory: {}\n", run_dir.string());
  const std::size_t phases = (cfg.total_steps + cfg.batch_size() - 1) / cfg.batch_size();
  std::size_t done = 0;
  const auto out = trainer::train(cfg, run_dir, [&](const trainer::MetricsRecord& r) {
    ++done;
    if (a.quiet && done != phases) return;
    fmt::print("[{}/{}] step {} return {:.2f} ratio_dev {:.4f} clip {:.3f}\n", done, phases, r.global_step,
               r.mean_episode_return, r.mean_ratio_deviation, r.clip_fraction);
  });
  const auto& last = out.records.back();
  fmt::print("finished: {} steps, last mean return {:.2f}, max ratio deviation {:.4f}\n", last.global_step,
             last.mean_episode_return, last.max_ratio_deviation_so_far);
  return kOk;
}

struct BenchArgs {
  std::string kinds = "spo,ppo_clip,simple";
  std::string seeds = "0";
  std::string out;
  bool force = false;
  bench::BenchConfig cfg;
};

int cmd_bench(const BenchArgs& a) {
  std::vector<objectives::ObjectiveKind> kinds;
  for (const auto& k : split_list(a.kinds)) {
    const auto kind = objectives::parse_objective(k);
    if (!kind) throw ConfigError("unknown objective kind '" + k + "' (spo, ppo_clip, simple)");
    kinds.push_back(*kind);
  }
  std::vector<std::uint64_t> seeds;
  for (const auto& s : split_list(a.seeds)) seeds.push_back(config_detail::to_uint("seeds", s));
  if (kinds.empty() || seeds.empty()) throw ConfigError("bench needs at least one kind and one seed");

  const fs::path dir = a.out.empty() ? output_root() / "bench" : fs::path(a.out);
  std::vector<fs::path> targets;
  for (auto k : kinds)
    for (auto s : seeds) targets.push_back(dir / fmt::format("{}_seed{}.csv", objectives::to_string(k), s));
  if (!a.force) {
    for (const auto& t : targets)
      if (fs::exists(t)) throw ConfigError("'" + t.string() + "' exists; pass --force to overwrite");
  }
  fs::create_directories(dir);

  std::size_t i = 0;
  for (auto k : kinds) {
    for (auto s : seeds) {
      const auto run = bench::run_ratio_bench(bench::make_batch(a.cfg, s), k);
      std::ofstream(targets[i]) << bench::bench_csv(run);
      const auto& end = run.trajectory.back();
      fmt::print("{:<10} seed {:<3} mean_surrogate {:.6f} mean|r-1| {:.6f} max|r-1| {:.6f} -> {}\n",
                 objectives::to_string(k), s, end.mean_surrogate, end.mean_ratio_dev, end.max_ratio_dev,
                 targets[i].string());
      ++i;
    }
  }
  return kOk;
}

int cmd_verify(const std::string& filter) {
  const auto results = verify::run_suites(filter);
  if (results.empty()) throw ConfigError("no suite matches '" + filter + "'");
  fmt::print("{:<24} {:>8} {:>12} {:>10} {:>6}\n", "suite", "cases", "max_error", "tolerance", "result");
  bool all = true;
  for (const auto& r : results) {
    fmt::print("{:<24} {:>8} {:>12.3e} {:>10.1e} {:>6}\n", r.name, r.cases, r.max_error, r.tolerance,
               r.passed ? "PASS" : "FAIL");
    if (!r.detail.empty()) fmt::print("  {}\n", r.detail);
    all = all && r.passed;
  }
  return all ? kOk : kPropertyFailure;
}

int cmd_eval(const std::string& checkpoint, std::size_t episodes, std::uint64_t seed, const std::string& env) {
  const auto ck = trainer::load_checkpoint_file(checkpoint);
  const std::string env_id = env.empty() ? ck.config.env_id : env;
  const auto res = trainer::evaluate(ck.agent.policy, env_id, episodes, seed);
  fmt::print("{}: {:.3f} +- {:.3f} over {} episodes (step {})\n", env_id, res.mean, res.stddev, episodes,
             ck.global_step);
  return kOk;
}

int cmd_export(const std::string& checkpoint, const std::string& what) {
  const auto ck = trainer::load_checkpoint_file(checkpoint);
  if (what == "config") {
    fmt::print("{}", to_toml(ck.config));
  } else if (what == "summary") {
    const auto& net = ck.agent.policy.net;
    std::string sizes;
    for (std::size_t i = 0; i < net.layer_sizes.size(); ++i) sizes += (i ? "-" : "") + std::to_string(net.layer_sizes[i]);
    fmt::print("env_id {}\nobjective {}\nglobal_step {}\npolicy {} ({} parameters)\nvalue {} parameters\n",
               ck.config.env_id, objectives::to_string(ck.config.objective), ck.global_step, sizes,
               net.num_parameters() + ck.agent.policy.log_std.size(), ck.agent.value.num_parameters());
  } else {
    throw ConfigError("export: unknown item '" + what + "' (config, summary)");
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simple Policy Optimization lab"};
  app.require_subcommand(1);

  TrainArgs targs;
  auto* train = app.add_subcommand("train", "Train an agent from a config file");
  train->add_option("-c,--config", targs.config, "TOML config file");
  train->add_option("-s,--set", targs.sets, "Override a config field (key=value), repeatable");
  train->add_option("-o,--out", targs.out, "Run directory (default: $SPO_LAB_OUT or runs/, per config and seed)");
  train->add_flag("-q,--quiet", targs.quiet, "Only print the final phase");

  BenchArgs bargs;
  auto* benchc = app.add_subcommand("bench", "Synthetic ratio bench, one CSV per (kind, seed)");
  benchc->add_option("--kinds", bargs.kinds, "Comma-separated objectives")->capture_default_str();
  benchc->add_option("--seeds", bargs.seeds, "Comma-separated seeds")->capture_default_str();
  benchc->add_option("--eps", bargs.cfg.eps)->capture_default_str();
  benchc->add_option("--lr", bargs.cfg.learning_rate)->capture_default_str();
  benchc->add_option("--batch", bargs.cfg.batch_size)->capture_default_str();
  benchc->add_option("--steps", bargs.cfg.num_steps)->capture_default_str();
  benchc->add_option("-o,--out", bargs.out, "Output directory (default: $SPO_LAB_OUT/bench or runs/bench)");
  benchc->add_flag("--force", bargs.force, "Overwrite existing CSVs");

  std::string filter;
  auto* verifyc = app.add_subcommand("verify", "Run the property suites");
  verifyc->add_option("-f,--filter", filter, "Only suites whose name contains this");

  std::string eval_ck, eval_env;
  std::size_t episodes = 10;
  std::uint64_t eval_seed = 0;
  auto* evalc = app.add_subcommand("eval", "Greedy evaluation of a checkpoint");
  evalc->add_option("checkpoint,--checkpoint", eval_ck, "checkpoint.json")->required();
  evalc->add_option("-n,--episodes", episodes)->capture_default_str();
  evalc->add_option("--seed", eval_seed)->capture_default_str();
  evalc->add_option("--env", eval_env, "Evaluate on another env id");

  std::string export_ck, export_what = "config";
  auto* exportc = app.add_subcommand("export", "Print the config or a summary stored in a checkpoint");
  exportc->add_option("checkpoint,--checkpoint", export_ck, "checkpoint.json")->required();
  exportc->add_option("--what", export_what, "config or summary")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (*train) return cmd_train(targs);
    if (*benchc) return cmd_bench(bargs);
    if (*verifyc) return cmd_verify(filter);
    if (*evalc) return cmd_eval(eval_ck, episodes, eval_seed, eval_env);
    if (*exportc) return cmd_export(export_ck, export_what);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kUsageError;
  } catch (const ShapeError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kUsageError;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kPropertyFailure;
  }
  return kUsageError;
}
