#pragma once

#include <stdexcept>
#include <string>

namespace bcam {

/// A value lies outside the mathematical domain of a distribution/copula.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed or degenerate user input (configs, data, term specifications).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed (singular system, bracketing failure, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bcam
