#pragma once

#include <stdexcept>
#include <string>

namespace reldepth {

// Shape or size disagreement between operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerically degenerate input: constant ground truth, fully masked
// reduction, singular transform.
class DegenerateError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// NaN or infinity where a finite value is required.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or unreadable file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace reldepth
