#include "sagc/error.hpp"

namespace sagc {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::MalformedDocument: return "MalformedDocument";
        case ErrorKind::MissingField: return "MissingField";
        case ErrorKind::DanglingEdge: return "DanglingEdge";
        case ErrorKind::BipartiteViolation: return "BipartiteViolation";
        case ErrorKind::UnknownClass: return "UnknownClass";
        case ErrorKind::DuplicateId: return "DuplicateId";
        case ErrorKind::EmptyGraph: return "EmptyGraph";
        case ErrorKind::EmptyDirectory: return "EmptyDirectory";
        case ErrorKind::IoFailure: return "IoFailure";
        case ErrorKind::NonConvergence: return "NonConvergence";
        case ErrorKind::EmptyTrainingSet: return "EmptyTrainingSet";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorKind::NumericalFault: return "NumericalFault";
        case ErrorKind::NonScalarLoss: return "NonScalarLoss";
        case ErrorKind::DoubleBackward: return "DoubleBackward";
        case ErrorKind::TooFewGraphs: return "TooFewGraphs";
        case ErrorKind::LabelOutOfRange: return "LabelOutOfRange";
        case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorKind::VersionMismatch: return "VersionMismatch";
        case ErrorKind::CorruptPayload: return "CorruptPayload";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

}  // namespace sagc
