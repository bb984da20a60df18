#pragma once

#include <stdexcept>
#include <string>

namespace rdx {

/// Malformed input data or an invalid design. The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated an operation precondition (bad order, kappa out of range, ...).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Not enough observations in a named cell or window. The CLI maps this to exit code 4.
class InsufficientDataError : public std::runtime_error {
 public:
  InsufficientDataError(std::string cell, const std::string& what)
      : std::runtime_error(what), cell_(std::move(cell)) {}

  const std::string& cell() const noexcept { return cell_; }

 private:
  std::string cell_;
};

}  // namespace rdx
