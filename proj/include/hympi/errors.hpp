#pragma once

#include <stdexcept>
#include <string>

namespace hympi {

// Inconsistent cluster spec, cost model, or benchmark plan.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An API precondition was violated by a rank program.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Shared-window access outside the view extent.
class BoundsError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// No runnable rank remains while some ranks are still blocked.
class DeadlockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hympi
