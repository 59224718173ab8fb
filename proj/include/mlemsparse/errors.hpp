#pragma once

#include <stdexcept>
#include <string>

namespace mlemsparse {

/// Error categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
  dimension,   // mismatched sizes or grids
  domain,      // input outside the mathematical domain of an operation
  parameter,   // invalid configuration parameter
  condition,   // numerically ill-conditioned request (e.g. degenerate Hessian)
  capability,  // request exceeds what the implementation supports
  state,       // operation called on an object in the wrong state
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define MLEMSPARSE_DEFINE_ERROR(Name, Kind)                              \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

MLEMSPARSE_DEFINE_ERROR(DimensionError, dimension)
MLEMSPARSE_DEFINE_ERROR(DomainError, domain)
MLEMSPARSE_DEFINE_ERROR(ParameterError, parameter)
MLEMSPARSE_DEFINE_ERROR(ConditionError, condition)
MLEMSPARSE_DEFINE_ERROR(CapabilityError, capability)
MLEMSPARSE_DEFINE_ERROR(StateError, state)

#undef MLEMSPARSE_DEFINE_ERROR

/// Raised by normalize_operator when no grid point is seen by any detector.
class EmptyFieldOfViewError : public DomainError {
 public:
  explicit EmptyFieldOfViewError(const std::string& what) : DomainError(what) {}
};

}  // namespace mlemsparse
