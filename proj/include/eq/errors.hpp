#pragma once

#include <stdexcept>
#include <string>

namespace eq {

/// Base of every error raised by the library. `kind()` is a stable
/// machine-readable tag that the CLI echoes in its diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error("invalid-argument", what) {}
};

/// A label or parameter outside the domain of a representation or family.
class DomainViolation : public Error {
 public:
  explicit DomainViolation(const std::string& what) : Error("domain-violation", what) {}
};

/// Fock truncation too small for the requested labels.
class CapacityError : public Error {
 public:
  CapacityError(const std::string& what, long required_dim)
      : Error("capacity", what), required_dim_(required_dim) {}

  long required_dim() const noexcept { return required_dim_; }

 private:
  long required_dim_;
};

class NumericalFailure : public Error {
 public:
  explicit NumericalFailure(const std::string& what) : Error("numerical-failure", what) {}
};

class InvalidTransform : public Error {
 public:
  explicit InvalidTransform(const std::string& what) : Error("invalid-transform", what) {}
};

}  // namespace eq
