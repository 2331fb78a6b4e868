#pragma once

#include <stdexcept>
#include <string>

namespace cbo {

// Failure categories surfaced by the library. Tests and the CLI dispatch on
// the kind rather than parsing messages.
enum class ErrorKind {
    CycleDetected,
    NoTarget,
    MultipleTargets,
    RoleConflict,
    UnknownNode,
    NonManipulativeCut,
    PomisUnavailable,
    SyntaxError,
    UnknownFunction,
    DependencyViolation,
    NumericOverflow,
    DomainViolation,
    InsufficientData,
    DegenerateColumn,
    NoNeighbors,
    PlanMismatch,
    NoEstimand,
    DimensionMismatch,
    NumericalFailure,
    ConfigError,
    IoError,
};

const char* to_string(ErrorKind kind);

class CboError : public std::runtime_error {
  public:
    CboError(ErrorKind kind, std::string message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

  private:
    ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
    throw CboError(kind, message);
}

}  // namespace cbo
