#pragma once

#include <stdexcept>
#include <string>

namespace ssr {

// Input violates a documented invariant (model spec, profile, assignment, ...).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dependency graph is not a DAG.
class CycleError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Resource budgets cannot be met (RAM, DSP, or an accelerator with no legal config).
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A file could not be opened, read or parsed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Simulation could not make progress.
class DeadlockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ssr
