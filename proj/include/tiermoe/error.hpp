// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <stdexcept>
#include <string>

namespace tiermoe {

// Shape mismatch, out-of-range id, or an invalid parameter combination.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An internal bookkeeping invariant did not hold at runtime.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Filesystem and parse failures; the message carries the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A persisted document parsed, but its contents violate a domain invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A persisted document carries a schema version this build does not read.
class VersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A run could not be scheduled under its configuration (e.g. no feasible
// device for a group when CPU fallback is disabled).
class RunFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define TIERMOE_CHECK(cond, msg)                                           \
  do {                                                                     \
    if (!(cond)) throw ::tiermoe::InvariantError(std::string(msg));        \
  } while (0)

}  // namespace tiermoe
