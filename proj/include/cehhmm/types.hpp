#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cehhmm {

/// Index of an action, observation, or memory symbol (0-based).
using Symbol = std::uint32_t;

/// Opaque hidden-state identifier. Tabular worlds use 0..num_states-1;
/// simulators may pack richer states into the 64 bits.
using StateId = std::uint64_t;

/// Inconsistent cardinalities, invalid parameters, malformed structures.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A document (world, policy, hhmm spec, experiment config) failed to parse
/// or validate. The message names the offending location.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An exact computation was refused because its size exceeds a cap.
class CapExceeded : public std::runtime_error {
 public:
  CapExceeded(const std::string& what, double estimate, double cap)
      : std::runtime_error(what + ": estimated size " + format_size(estimate) +
                           " exceeds cap " + format_size(cap)),
        estimate_(estimate),
        cap_(cap) {}

  double estimate() const noexcept { return estimate_; }
  double cap() const noexcept { return cap_; }

 private:
  static std::string format_size(double v);

  double estimate_;
  double cap_;
};

}  // namespace cehhmm
