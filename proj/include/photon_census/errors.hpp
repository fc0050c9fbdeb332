#pragma once

#include <stdexcept>
#include <string>

namespace photon_census {

// Argument outside the mathematical domain of an operation.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The data cannot have been produced by the given parameters
// (some observed count has zero probability).
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical procedure produced a non-finite or otherwise unusable value.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Derivatives requested at a point where they do not exist (p at 0 or 1).
class SingularInputError : public DomainError {
 public:
  using DomainError::DomainError;
};

class NoFeasibleCandidate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace photon_census
