#pragma once

#include <stdexcept>
#include <string>

namespace spolab {

/// Root of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector or matrix dimensions disagree with what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Bad hyperparameter or configuration value (eps <= 0, unknown key, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A batch-level operation received no samples.
class EmptyBatchError : public Error {
 public:
  using Error::Error;
};

/// An operation was called before the data it depends on was computed.
class SequencingError : public Error {
 public:
  using Error::Error;
};

/// Argument outside an operation's domain (invalid simplex, out-of-range action).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Gradient with a NaN or infinite entry reached the optimizer.
class PoisonedGradientError : public Error {
 public:
  PoisonedGradientError(std::size_t layer, const std::string& what)
      : Error("poisoned gradient in layer " + std::to_string(layer) + ": " + what), layer_(layer) {}
  std::size_t layer() const noexcept { return layer_; }

 private:
  std::size_t layer_;
};

/// exp(new - old) would overflow.
class RatioOverflowError : public Error {
 public:
  RatioOverflowError(double new_log_prob, double old_log_prob)
      : Error("probability ratio overflow: new log-prob " + std::to_string(new_log_prob) +
              ", old log-prob " + std::to_string(old_log_prob)),
        new_log_prob_(new_log_prob),
        old_log_prob_(old_log_prob) {}
  double new_log_prob() const noexcept { return new_log_prob_; }
  double old_log_prob() const noexcept { return old_log_prob_; }

 private:
  double new_log_prob_;
  double old_log_prob_;
};

/// Loss became NaN/inf during an update; carries the mini-batch index.
class NonFiniteLossError : public Error {
 public:
  NonFiniteLossError(std::size_t epoch, std::size_t minibatch)
      : Error("non-finite loss at epoch " + std::to_string(epoch) + ", mini-batch " +
              std::to_string(minibatch)),
        epoch_(epoch),
        minibatch_(minibatch) {}
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t minibatch() const noexcept { return minibatch_; }

 private:
  std::size_t epoch_;
  std::size_t minibatch_;
};

/// Environment fault during rollout collection.
class EnvError : public Error {
 public:
  using Error::Error;
};

}  // namespace spolab
