#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace topolearn {

enum class ErrorCategory {
    InvalidInput,
    NotSpanningTree,
    DegreeTwoMissingNode,
    RootDegreeViolation,
    UnobservedLeaf,
    ObservedInternalNode,
    EdgeNotInGraph,
    UnknownNode,
    NotAnAncestor,
    CycleDetected,
    RootNotAllowed,
    SingularMatrix,
    DimensionMismatch,
    NonPSDStats,
    TooFewSamples,
    AncestorMismatch,
    TooLarge,
    NoFeasibleTree,
    InfeasibleShape,
    NodeUniverseMismatch,
    ParseError,
    IoError,
};

std::string_view to_string(ErrorCategory category);

/// Base exception for every recoverable failure in the library. The category
/// is what the CLI reports as its machine-readable error tag.
class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& message)
        : std::runtime_error(message), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

}  // namespace topolearn
