#pragma once

// Synthetic ratio bench: the probability ratios of a batch are free variables
// moved by plain gradient ascent on a per-sample objective, with standard
// normal advantages. Also the score normalizer and a metrics-file aggregator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "spolab/errors.hpp"
#include "spolab/objectives.hpp"
#include "spolab/rng.hpp"

namespace spolab::bench {

using objectives::ObjectiveKind;

inline constexpr double kRatioFloor = 1e-6;

struct BenchConfig {
  double eps = 0.2;
  double learning_rate = 1e-3;
  std::size_t batch_size = 1024;
  std::size_t num_steps = 10'000;
};

struct SyntheticBatch {
  std::vector<double> advantages;
  std::vector<double> ratios;
  double eps = 0.2;
  double learning_rate = 1e-3;
  std::size_t num_steps = 10'000;
};

inline SyntheticBatch make_batch(const BenchConfig& cfg, std::uint64_t seed) {
  if (!(cfg.eps > 0.0)) throw ConfigError("bench eps must be positive");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("bench learning rate must be positive");
  if (cfg.batch_size == 0) throw ConfigError("bench batch size must be positive");
  Rng rng(seed);
  SyntheticBatch b;
  b.advantages.resize(cfg.batch_size);
  for (auto& a : b.advantages) a = rng.normal();
  b.ratios.assign(cfg.batch_size, 1.0);
  b.eps = cfg.eps;
  b.learning_rate = cfg.learning_rate;
  b.num_steps = cfg.num_steps;
  return b;
}

struct BenchPoint {
  std::size_t step = 0;
  double mean_surrogate = 0.0;  // mean r*A
  double mean_ratio_dev = 0.0;  // mean |r-1|
  double max_ratio_dev = 0.0;   // max |r-1|
};

struct BenchRun {
  std::vector<BenchPoint> trajectory;  // trajectory[0] is the initial state
  std::vector<double> final_ratios;
  /// First step at which each sample came within the boundary tolerance of
  /// 1 + sign(A) eps; num_steps + 1 if it never did.
  std::vector<std::size_t> steps_to_boundary;
  double final_grad_norm = 0.0;
  std::size_t steps_taken = 0;
};

namespace detail {

inline BenchPoint measure(std::size_t step, const std::vector<double>& r, const std::vector<double>& a) {
  BenchPoint p{step, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < r.size(); ++i) {
    p.mean_surrogate += r[i] * a[i];
    const double d = std::abs(r[i] - 1.0);
    p.mean_ratio_dev += d;
    p.max_ratio_dev = std::max(p.max_ratio_dev, d);
  }
  p.mean_surrogate /= static_cast<double>(r.size());
  p.mean_ratio_dev /= static_cast<double>(r.size());
  return p;
}

}  // namespace detail

/// r <- max(r + lr * df/dr, floor) for every sample, for batch.num_steps steps
/// or until the gradient norm drops below grad_tol (when grad_tol > 0).
inline BenchRun run_ratio_bench(const SyntheticBatch& batch, ObjectiveKind kind, double grad_tol = 0.0,
                                double boundary_tol = 1e-3) {
  if (batch.advantages.size() != batch.ratios.size()) throw ShapeError("advantages and ratios differ in length");
  if (batch.advantages.empty()) throw EmptyBatchError("empty synthetic batch");
  const std::size_t n = batch.ratios.size();
  std::vector<double> r = batch.ratios;
  std::vector<double> g(n);
  BenchRun run;
  run.steps_to_boundary.assign(n, batch.num_steps + 1);
  auto mark = [&](std::size_t step) {
    for (std::size_t i = 0; i < n; ++i) {
      if (run.steps_to_boundary[i] <= batch.num_steps) continue;
      const double target = 1.0 + objectives::sign(batch.advantages[i]) * batch.eps;
      if (std::abs(r[i] - target) <= boundary_tol) run.steps_to_boundary[i] = step;
    }
  };
  run.trajectory.push_back(detail::measure(0, r, batch.advantages));
  mark(0);
  for (std::size_t step = 1; step <= batch.num_steps; ++step) {
    double gn = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = objectives::objective_grad(kind, r[i], batch.advantages[i], batch.eps);
      gn += g[i] * g[i];
    }
    run.final_grad_norm = std::sqrt(gn);
    if (grad_tol > 0.0 && run.final_grad_norm < grad_tol) break;
    for (std::size_t i = 0; i < n; ++i) r[i] = std::max(r[i] + batch.learning_rate * g[i], kRatioFloor);
    run.steps_taken = step;
    run.trajectory.push_back(detail::measure(step, r, batch.advantages));
    mark(step);
  }
  if (grad_tol == 0.0 || run.final_grad_norm >= grad_tol) {
    double gn = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = objectives::objective_grad(kind, r[i], batch.advantages[i], batch.eps);
      gn += gi * gi;
    }
    run.final_grad_norm = std::sqrt(gn);
  }
  run.final_ratios = std::move(r);
  return run;
}

inline std::string bench_csv(const BenchRun& run) {
  std::string s = "step,mean_surrogate,mean_ratio_dev,max_ratio_dev\n";
  for (const auto& p : run.trajectory)
    s += fmt::format("{},{},{},{}\n", p.step, p.mean_surrogate, p.mean_ratio_dev, p.max_ratio_dev);
  return s;
}

/// (score - min) / (max - min)
inline double normalized_score(double score, double min_ref, double max_ref) {
  if (!(max_ref > min_ref)) throw DomainError("normalized_score needs max_ref > min_ref");
  return (score - min_ref) / (max_ref - min_ref);
}

// ---- aggregation over metrics files ------------------------------------------

struct RunSummary {
  std::string source;
  double tail_mean = 0.0;
  std::size_t records_used = 0;
};

struct Aggregate {
  std::vector<RunSummary> runs;
  double mean = 0.0;
  double stddev = 0.0;  // population std across runs
};

/// mean_episode_return column of a metrics CSV.
inline std::vector<double> read_returns_csv(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw DomainError("metrics file is empty");
  std::vector<std::string> cols;
  {
    std::stringstream hs(header);
    std::string c;
    while (std::getline(hs, c, ',')) cols.push_back(c);
  }
  const auto it = std::find(cols.begin(), cols.end(), "mean_episode_return");
  if (it == cols.end()) throw DomainError("metrics file has no mean_episode_return column");
  const auto col = static_cast<std::size_t>(it - cols.begin());
  std::vector<double> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string cell;
    for (std::size_t i = 0; i <= col; ++i)
      if (!std::getline(ls, cell, ',')) throw DomainError("short row in metrics file");
    out.push_back(std::stod(cell));
  }
  return out;
}

/// Mean over the final ceil(fraction * n) values.
inline double tail_mean(const std::vector<double>& values, double last_fraction, std::size_t* used = nullptr) {
  if (!(last_fraction > 0.0 && last_fraction <= 1.0)) throw DomainError("last_fraction must lie in (0, 1]");
  const auto k = static_cast<std::size_t>(std::ceil(last_fraction * static_cast<double>(values.size()) - 1e-9));
  if (k == 0) throw EmptyBatchError("aggregation window is empty");
  const double s = std::accumulate(values.end() - static_cast<std::ptrdiff_t>(k), values.end(), 0.0);
  if (used) *used = k;
  return s / static_cast<double>(k);
}

inline Aggregate aggregate_runs(const std::vector<std::filesystem::path>& files, double last_fraction) {
  if (files.empty()) throw DomainError("aggregate_runs needs at least one metrics file");
  Aggregate agg;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw DomainError("cannot read metrics file '" + f.string() + "'");
    const auto values = read_returns_csv(in);
    RunSummary s;
    s.source = f.string();
    s.tail_mean = tail_mean(values, last_fraction, &s.records_used);
    agg.runs.push_back(s);
  }
  const double n = static_cast<double>(agg.runs.size());
  for (const auto& r : agg.runs) agg.mean += r.tail_mean;
  agg.mean /= n;
  for (const auto& r : agg.runs) agg.stddev += (r.tail_mean - agg.mean) * (r.tail_mean - agg.mean);
  agg.stddev = std::sqrt(agg.stddev / n);
  return agg;
}

}  // namespace spolab::bench
