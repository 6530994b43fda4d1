#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace brox {

/// A coordinate outside the represented grid, or an off-grid extent.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The driving path left the range of the scale function on the current window.
class RangeExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A sampler hit its step cap. Carries how far it got.
class StepBudgetExceeded : public std::runtime_error {
 public:
  StepBudgetExceeded(const std::string& what, std::uint64_t steps, double progress)
      : std::runtime_error(what), steps_(steps), progress_(progress) {}
  std::uint64_t steps() const { return steps_; }
  /// Clock (or path time) reached when the budget ran out.
  double progress() const { return progress_; }

 private:
  std::uint64_t steps_;
  double progress_;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace brox
