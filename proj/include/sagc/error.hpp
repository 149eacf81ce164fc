#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sagc {

enum class ErrorKind {
    MalformedDocument,
    MissingField,
    DanglingEdge,
    BipartiteViolation,
    UnknownClass,
    DuplicateId,
    EmptyGraph,
    EmptyDirectory,
    IoFailure,
    NonConvergence,
    EmptyTrainingSet,
    DimensionMismatch,
    ShapeMismatch,
    IndexOutOfRange,
    NumericalFault,
    NonScalarLoss,
    DoubleBackward,
    TooFewGraphs,
    LabelOutOfRange,
    NonFiniteLoss,
    VersionMismatch,
    CorruptPayload,
    InvalidArgument,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library; callers dispatch on kind().
class Error : public std::runtime_error {
   public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), message_(message) {}

    ErrorKind kind() const noexcept { return kind_; }
    // what() without the kind prefix.
    const std::string& message() const noexcept { return message_; }

   private:
    ErrorKind kind_;
    std::string message_;
};

}  // namespace sagc
