#pragma once

#include <stdexcept>
#include <string>

namespace pmidx {

// A machine or fleet specification breaks one of the model invariants.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string invariant, const std::string& what)
      : std::runtime_error(what), invariant_(std::move(invariant)) {}
  const std::string& invariant() const noexcept { return invariant_; }

 private:
  std::string invariant_;
};

// A closed-form denominator or an iterative routine left its safe range.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The joint state/action space would exceed the configured memory budget.
class BudgetExceeded : public std::runtime_error {
 public:
  BudgetExceeded(std::size_t required, std::size_t budget)
      : std::runtime_error("joint MDP needs " + std::to_string(required) +
                           " state-action entries, budget is " + std::to_string(budget)),
        required_(required) {}
  std::size_t required() const noexcept { return required_; }

 private:
  std::size_t required_;
};

// Value iteration hit its iteration cap.
class NotConverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Two independent routes to the same quantity disagree.
class ModelInconsistency : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pmidx
