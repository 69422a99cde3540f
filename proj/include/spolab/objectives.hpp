#pragma once

// Per-sample surrogate objectives as functions of the probability ratio r and
// advantage A, their r-derivatives, and the batch losses built from them.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spolab/errors.hpp"

namespace spolab::objectives {

enum class ObjectiveKind { PpoClip, Spo, SimpleAligned };

inline std::string_view to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::PpoClip: return "ppo_clip";
    case ObjectiveKind::Spo: return "spo";
    case ObjectiveKind::SimpleAligned: return "simple";
  }
  return "?";
}

inline std::optional<ObjectiveKind> parse_objective(std::string_view s) {
  if (s == "ppo_clip" || s == "ppo") return ObjectiveKind::PpoClip;
  if (s == "spo") return ObjectiveKind::Spo;
  if (s == "simple" || s == "simple_aligned") return ObjectiveKind::SimpleAligned;
  return std::nullopt;
}

/// sign with sign(0) = 0.
constexpr double sign(double x) noexcept { return static_cast<double>((x > 0.0) - (x < 0.0)); }

inline void require_positive_eps(double eps) {
  if (!(eps > 0.0)) throw ConfigError("eps must be positive, got " + std::to_string(eps));
}

/// r*A - |A|/(2 eps) * (r-1)^2
inline double f_spo(double r, double A, double eps) {
  require_positive_eps(eps);
  const double d = r - 1.0;
  return r * A - std::abs(A) / (2.0 * eps) * d * d;
}

inline double f_spo_grad(double r, double A, double eps) {
  require_positive_eps(eps);
  return A - std::abs(A) / eps * (r - 1.0);
}

/// min(r*A, clip(r, 1-eps, 1+eps)*A)
inline double f_ppo(double r, double A, double eps) {
  const double clipped = std::clamp(r, 1.0 - eps, 1.0 + eps);
  return std::min(r * A, clipped * A);
}

/// A inside the unclipped region, 0 where the clipped branch is active.
/// At the kinks r = 1 +- eps the interior branch is taken.
inline double f_ppo_grad(double r, double A, double eps) {
  if ((A > 0.0 && r <= 1.0 + eps) || (A < 0.0 && r >= 1.0 - eps)) return A;
  return 0.0;
}

/// -(r - 1 - sign(A) eps)^2
inline double f_simple(double r, double A, double eps) {
  const double d = r - 1.0 - sign(A) * eps;
  return -d * d;
}

inline double f_simple_grad(double r, double A, double eps) { return -2.0 * (r - 1.0 - sign(A) * eps); }

inline double objective(ObjectiveKind k, double r, double A, double eps) {
  switch (k) {
    case ObjectiveKind::PpoClip: return f_ppo(r, A, eps);
    case ObjectiveKind::Spo: return f_spo(r, A, eps);
    case ObjectiveKind::SimpleAligned: return f_simple(r, A, eps);
  }
  return 0.0;
}

inline double objective_grad(ObjectiveKind k, double r, double A, double eps) {
  switch (k) {
    case ObjectiveKind::PpoClip: return f_ppo_grad(r, A, eps);
    case ObjectiveKind::Spo: return f_spo_grad(r, A, eps);
    case ObjectiveKind::SimpleAligned: return f_simple_grad(r, A, eps);
  }
  return 0.0;
}

// ---- batch losses ------------------------------------------------------------

/// -mean_i f(r_i, A_i, eps)
inline double policy_loss(std::span<const double> ratios, std::span<const double> advantages, ObjectiveKind kind,
                          double eps) {
  if (ratios.size() != advantages.size()) throw ShapeError("ratios and advantages differ in length");
  if (ratios.empty()) throw EmptyBatchError("policy_loss on an empty batch");
  require_positive_eps(eps);
  double sum = 0.0;
  for (std::size_t i = 0; i < ratios.size(); ++i) sum += objective(kind, ratios[i], advantages[i], eps);
  return -sum / static_cast<double>(ratios.size());
}

/// (1/2N) sum (V - R)^2
inline double value_loss(std::span<const double> values, std::span<const double> returns) {
  if (values.size() != returns.size()) throw ShapeError("values and returns differ in length");
  if (values.empty()) throw EmptyBatchError("value_loss on an empty batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - returns[i];
    sum += d * d;
  }
  return sum / (2.0 * static_cast<double>(values.size()));
}

inline double total_loss(double policy_loss, double value_loss, double entropy, double c1 = 0.5, double c2 = 0.01) {
  return policy_loss + c1 * value_loss - c2 * entropy;
}

/// Loss terms of one update step plus ratio diagnostics.
struct LossBreakdown {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double total = 0.0;
  double mean_ratio_deviation = 0.0;
  double clip_fraction = 0.0;
};

inline LossBreakdown make_breakdown(double policy_loss, double value_loss, double entropy, double c1, double c2,
                                    std::span<const double> ratios, double eps) {
  LossBreakdown b{policy_loss, value_loss, entropy, total_loss(policy_loss, value_loss, entropy, c1, c2), 0.0, 0.0};
  if (!ratios.empty()) {
    std::size_t clipped = 0;
    double dev = 0.0;
    for (double r : ratios) {
      dev += std::abs(r - 1.0);
      if (std::abs(r - 1.0) > eps) ++clipped;
    }
    b.mean_ratio_deviation = dev / static_cast<double>(ratios.size());
    b.clip_fraction = static_cast<double>(clipped) / static_cast<double>(ratios.size());
  }
  return b;
}

/// In-place zero-mean, unit-std normalization with a std floor of 1e-8.
inline void normalize_advantages(std::span<double> adv) {
  if (adv.empty()) throw EmptyBatchError("normalize_advantages on an empty batch");
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::max(std::sqrt(var / n), 1e-8);
  for (auto& a : adv) a = (a - mean) / sd;
}

}  // namespace spolab::objectives
