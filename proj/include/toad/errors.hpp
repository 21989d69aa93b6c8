#pragma once

#include <stdexcept>
#include <string>

namespace toad {

// Bad configuration: shape mismatches, unknown keys, missing topics.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input data: malformed files, out-of-range labels, empty sequences.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API misuse, e.g. calling backward on a non-scalar.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Training produced a non-finite loss term.
class DivergedError : public std::runtime_error {
 public:
  DivergedError(std::string term, int epoch)
      : std::runtime_error("loss term '" + term + "' became non-finite at epoch " +
                           std::to_string(epoch)),
        term_(std::move(term)),
        epoch_(epoch) {}

  const std::string& term() const { return term_; }
  int epoch() const { return epoch_; }

 private:
  std::string term_;
  int epoch_;
};

}  // namespace toad
