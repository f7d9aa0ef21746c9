#ifndef WDRO_ERROR_HPP
#define WDRO_ERROR_HPP

#include <stdexcept>
#include <string>

namespace wdro {

/// Failure categories. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
  validation = 2,  // malformed input or violated precondition
  contract = 3,    // certificate / lambda_min contract failure
  numeric = 4,     // NaN or Inf guard tripped
  mismatch = 5,    // replay produced different bytes
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(ErrorKind::contract, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

class MismatchError : public Error {
 public:
  explicit MismatchError(const std::string& what) : Error(ErrorKind::mismatch, what) {}
};

}  // namespace wdro

#endif  // WDRO_ERROR_HPP
