#include "cbo/errors.hpp"

namespace cbo {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::CycleDetected: return "CycleDetected";
        case ErrorKind::NoTarget: return "NoTarget";
        case ErrorKind::MultipleTargets: return "MultipleTargets";
        case ErrorKind::RoleConflict: return "RoleConflict";
        case ErrorKind::UnknownNode: return "UnknownNode";
        case ErrorKind::NonManipulativeCut: return "NonManipulativeCut";
        case ErrorKind::PomisUnavailable: return "PomisUnavailable";
        case ErrorKind::SyntaxError: return "SyntaxError";
        case ErrorKind::UnknownFunction: return "UnknownFunction";
        case ErrorKind::DependencyViolation: return "DependencyViolation";
        case ErrorKind::NumericOverflow: return "NumericOverflow";
        case ErrorKind::DomainViolation: return "DomainViolation";
        case ErrorKind::InsufficientData: return "InsufficientData";
        case ErrorKind::DegenerateColumn: return "DegenerateColumn";
        case ErrorKind::NoNeighbors: return "NoNeighbors";
        case ErrorKind::PlanMismatch: return "PlanMismatch";
        case ErrorKind::NoEstimand: return "NoEstimand";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::NumericalFailure: return "NumericalFailure";
        case ErrorKind::ConfigError: return "ConfigError";
        case ErrorKind::IoError: return "IoError";
    }
    return "UnknownError";
}

}  // namespace cbo
