#pragma once

// TrainConfig and its flat `key = value` text form (a TOML subset: no tables,
// strings in double quotes, integer arrays in brackets, '#' comments).

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "spolab/envs.hpp"
#include "spolab/errors.hpp"
#include "spolab/objectives.hpp"

namespace spolab {

struct TrainConfig {
  std::string env_id = "cartpole";
  objectives::ObjectiveKind objective = objectives::ObjectiveKind::Spo;
  double eps = 0.2;
  std::size_t num_workers = 8;
  std::size_t horizon = 128;
  std::size_t total_steps = 1'000'000;
  double learning_rate = 2.5e-4;
  bool lr_decay = true;
  std::size_t update_epochs = 4;
  std::size_t num_minibatches = 4;
  double gamma = 0.99;
  double lambda = 0.95;
  double c1 = 0.5;
  double c2 = 0.01;
  bool advantage_norm = true;
  std::uint64_t seed = 0;

  std::vector<std::size_t> hidden_sizes{64, 64};
  double initial_log_std = 0.0;
  // Off-by-default code-level extras. 0 disables each.
  double max_grad_norm = 0.0;
  double target_kl = 0.0;
  bool adaptive_lr = false;

  std::size_t checkpoint_every = 10;
  bool parallel_rollouts = false;
  bool log_wall_time = false;

  std::size_t batch_size() const { return num_workers * horizon; }
  std::size_t minibatch_size() const { return batch_size() / num_minibatches; }
  bool continuous() const { return env_id == "pointmass"; }
};

/// Discrete envs take the Atari column of the hyperparameter table,
/// continuous ones the MuJoCo column.
inline TrainConfig default_config(std::string_view env_id) {
  TrainConfig c;
  c.env_id = std::string(env_id);
  if (c.continuous()) {
    c.horizon = 256;
    c.learning_rate = 3e-4;
    c.update_epochs = 10;
    c.c2 = 0.0;
  }
  return c;
}

inline void validate(const TrainConfig& c) {
  if (c.env_id.empty()) throw ConfigError("missing required field 'env_id'");
  if (!envs::is_known_env(c.env_id)) throw ConfigError("env_id: unknown environment '" + c.env_id + "'");
  if (!(c.eps > 0.0)) throw ConfigError("eps: must be positive");
  if (c.num_workers == 0) throw ConfigError("num_workers: must be positive");
  if (c.horizon == 0) throw ConfigError("horizon: must be positive");
  if (c.num_minibatches == 0) throw ConfigError("num_minibatches: must be positive");
  if (c.batch_size() % c.num_minibatches != 0)
    throw ConfigError(fmt::format("num_minibatches: batch size {} is not divisible by {}", c.batch_size(),
                                  c.num_minibatches));
  if (c.total_steps < c.batch_size())
    throw ConfigError(fmt::format("total_steps: {} is smaller than one batch ({})", c.total_steps, c.batch_size()));
  if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate: must be positive");
  if (c.update_epochs == 0) throw ConfigError("update_epochs: must be positive");
  if (c.gamma < 0.0 || c.gamma > 1.0) throw ConfigError("gamma: must lie in [0, 1]");
  if (c.lambda < 0.0 || c.lambda > 1.0) throw ConfigError("lambda: must lie in [0, 1]");
  if (c.c1 < 0.0 || c.c2 < 0.0) throw ConfigError("c1/c2: must be non-negative");
  if (c.hidden_sizes.empty()) throw ConfigError("hidden_sizes: need at least one hidden layer");
  for (auto h : c.hidden_sizes)
    if (h == 0) throw ConfigError("hidden_sizes: widths must be positive");
  if (c.checkpoint_every == 0) throw ConfigError("checkpoint_every: must be positive");
}

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string unquote(const std::string& key, const std::string& v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  if (!v.empty() && v.front() == '"') throw ConfigError(key + ": unterminated string");
  return v;
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw ConfigError(key + ": trailing characters in number '" + v + "'");
    return d;
  } catch (const std::logic_error&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::string digits;
  for (char ch : v)
    if (ch != '_') digits += ch;
  if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
    // Accept integral values written in exponent form, e.g. 3e5.
    const double d = to_double(key, digits);
    if (d < 0.0 || d != static_cast<double>(static_cast<std::uint64_t>(d)))
      throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return static_cast<std::uint64_t>(d);
  }
  try {
    return std::stoull(digits);
  } catch (const std::logic_error&) {
    throw ConfigError(key + ": integer out of range '" + v + "'");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::vector<std::size_t> to_uint_list(const std::string& key, const std::string& v) {
  if (v.size() < 2 || v.front() != '[' || v.back() != ']') throw ConfigError(key + ": expected a list like [64, 64]");
  std::vector<std::size_t> out;
  std::stringstream ss(v.substr(1, v.size() - 2));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(static_cast<std::size_t>(to_uint(key, item)));
  }
  return out;
}

inline std::string fmt_double(double d) {
  std::string s = fmt::format("{}", d);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

}  // namespace config_detail

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "env_id",         "objective",       "eps",          "num_workers",      "horizon",
      "total_steps",    "learning_rate",   "lr_decay",     "update_epochs",    "num_minibatches",
      "gamma",          "lambda",          "c1",           "c2",               "advantage_norm",
      "seed",           "hidden_sizes",    "initial_log_std", "max_grad_norm", "target_kl",
      "adaptive_lr",    "checkpoint_every", "parallel_rollouts", "log_wall_time"};
  return keys;
}

/// Assigns one field from its textual value. Unknown keys are errors.
inline void set_field(TrainConfig& c, const std::string& key, const std::string& raw) {
  using namespace config_detail;
  const std::string v = trim(raw);
  if (key == "env_id") c.env_id = unquote(key, v);
  else if (key == "objective") {
    const auto k = objectives::parse_objective(unquote(key, v));
    if (!k) throw ConfigError("objective: unknown kind '" + v + "' (expected spo, ppo_clip or simple)");
    c.objective = *k;
  } else if (key == "eps") c.eps = to_double(key, v);
  else if (key == "num_workers") c.num_workers = to_uint(key, v);
  else if (key == "horizon") c.horizon = to_uint(key, v);
  else if (key == "total_steps") c.total_steps = to_uint(key, v);
  else if (key == "learning_rate") c.learning_rate = to_double(key, v);
  else if (key == "lr_decay") c.lr_decay = to_bool(key, v);
  else if (key == "update_epochs") c.update_epochs = to_uint(key, v);
  else if (key == "num_minibatches") c.num_minibatches = to_uint(key, v);
  else if (key == "gamma") c.gamma = to_double(key, v);
  else if (key == "lambda") c.lambda = to_double(key, v);
  else if (key == "c1") c.c1 = to_double(key, v);
  else if (key == "c2") c.c2 = to_double(key, v);
  else if (key == "advantage_norm") c.advantage_norm = to_bool(key, v);
  else if (key == "seed") c.seed = to_uint(key, v);
  else if (key == "hidden_sizes") c.hidden_sizes = to_uint_list(key, v);
  else if (key == "initial_log_std") c.initial_log_std = to_double(key, v);
  else if (key == "max_grad_norm") c.max_grad_norm = to_double(key, v);
  else if (key == "target_kl") c.target_kl = to_double(key, v);
  else if (key == "adaptive_lr") c.adaptive_lr = to_bool(key, v);
  else if (key == "checkpoint_every") c.checkpoint_every = to_uint(key, v);
  else if (key == "parallel_rollouts") c.parallel_rollouts = to_bool(key, v);
  else if (key == "log_wall_time") c.log_wall_time = to_bool(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

/// Ordered key/value pairs from the flat text format.
inline std::vector<std::pair<std::string, std::string>> parse_kv_text(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::stringstream ss{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    // Strip comments outside of quotes.
    bool in_str = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_str = !in_str;
      if (line[i] == '#' && !in_str) {
        line.resize(i);
        break;
      }
    }
    const std::string t = config_detail::trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') throw ConfigError(fmt::format("line {}: tables are not supported in run configs", lineno));
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("line {}: expected key = value", lineno));
    out.emplace_back(config_detail::trim(t.substr(0, eq)), config_detail::trim(t.substr(eq + 1)));
  }
  return out;
}

/// "key=value" override string -> pair.
inline std::pair<std::string, std::string> parse_override(std::string_view s) {
  const auto eq = s.find('=');
  if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(s) + "' is not key=value");
  return {config_detail::trim(s.substr(0, eq)), config_detail::trim(s.substr(eq + 1))};
}

/// File values over per-env defaults, CLI overrides over file values. The env
/// id picks the defaults, so it is resolved first.
inline TrainConfig resolve_config(const std::vector<std::pair<std::string, std::string>>& file_kv,
                                  const std::vector<std::pair<std::string, std::string>>& overrides) {
  const auto& keys = config_keys();
  auto known = [&](const std::string& k) { return std::find(keys.begin(), keys.end(), k) != keys.end(); };
  for (const auto& [k, v] : file_kv)
    if (!known(k)) throw ConfigError("unknown config key '" + k + "'");
  for (const auto& [k, v] : overrides)
    if (!known(k)) throw ConfigError("unknown override key '" + k + "'");

  std::optional<std::string> env_id;
  for (const auto& [k, v] : file_kv)
    if (k == "env_id") env_id = config_detail::unquote(k, config_detail::trim(v));
  for (const auto& [k, v] : overrides)
    if (k == "env_id") env_id = config_detail::unquote(k, config_detail::trim(v));
  if (!env_id || env_id->empty()) throw ConfigError("missing required field 'env_id'");
  if (!envs::is_known_env(*env_id)) throw ConfigError("env_id: unknown environment '" + *env_id + "'");

  TrainConfig c = default_config(*env_id);
  for (const auto& [k, v] : file_kv) set_field(c, k, v);
  for (const auto& [k, v] : overrides) set_field(c, k, v);
  validate(c);
  return c;
}

inline TrainConfig load_config_file(const std::string& path,
                                    const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return resolve_config(parse_kv_text(buf.str()), overrides);
}

/// Every field, in config_keys() order. Parsing the result reproduces `c`.
inline std::string to_toml(const TrainConfig& c) {
  using config_detail::fmt_double;
  std::string hidden = "[";
  for (std::size_t i = 0; i < c.hidden_sizes.size(); ++i) hidden += (i ? ", " : "") + std::to_string(c.hidden_sizes[i]);
  hidden += "]";
  auto b = [](bool x) { return x ? "true" : "false"; };
  std::string s;
  s += fmt::format("env_id = \"{}\"\n", c.env_id);
  s += fmt::format("objective = \"{}\"\n", objectives::to_string(c.objective));
  s += fmt::format("eps = {}\n", fmt_double(c.eps));
  s += fmt::format("num_workers = {}\n", c.num_workers);
  s += fmt::format("horizon = {}\n", c.horizon);
  s += fmt::format("total_steps = {}\n", c.total_steps);
  s += fmt::format("learning_rate = {}\n", fmt_double(c.learning_rate));
  s += fmt::format("lr_decay = {}\n", b(c.lr_decay));
  s += fmt::format("update_epochs = {}\n", c.update_epochs);
  s += fmt::format("num_minibatches = {}\n", c.num_minibatches);
  s += fmt::format("gamma = {}\n", fmt_double(c.gamma));
  s += fmt::format("lambda = {}\n", fmt_double(c.lambda));
  s += fmt::format("c1 = {}\n", fmt_double(c.c1));
  s += fmt::format("c2 = {}\n", fmt_double(c.c2));
  s += fmt::format("advantage_norm = {}\n", b(c.advantage_norm));
  s += fmt::format("seed = {}\n", c.seed);
  s += fmt::format("hidden_sizes = {}\n", hidden);
  s += fmt::format("initial_log_std = {}\n", fmt_double(c.initial_log_std));
  s += fmt::format("max_grad_norm = {}\n", fmt_double(c.max_grad_norm));
  s += fmt::format("target_kl = {}\n", fmt_double(c.target_kl));
  s += fmt::format("adaptive_lr = {}\n", b(c.adaptive_lr));
  s += fmt::format("checkpoint_every = {}\n", c.checkpoint_every);
  s += fmt::format("parallel_rollouts = {}\n", b(c.parallel_rollouts));
  s += fmt::format("log_wall_time = {}\n", b(c.log_wall_time));
  return s;
}

}  // namespace spolab
