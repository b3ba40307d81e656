#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mgruip {

/// Operand shapes do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Batch normalization asked for training statistics over fewer than two rows.
class DegenerateBatchError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// API misuse: mismatched cache, push after flush, and similar sequencing faults.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Rejected topology, config or model file. Carries a 1-based source line when
/// the problem can be traced to one (0 otherwise).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Training produced a non-finite loss or gradient.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mgruip
