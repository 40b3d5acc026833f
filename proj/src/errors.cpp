#include "dynot/errors.hpp"

namespace dynot {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::IncompatibleSize: return "IncompatibleSize";
    case ErrorCode::ZeroMass: return "ZeroMass";
    case ErrorCode::NonPositiveDensity: return "NonPositiveDensity";
    case ErrorCode::MassMismatch: return "MassMismatch";
    case ErrorCode::DisconnectedDomain: return "DisconnectedDomain";
    case ErrorCode::SolverDivergence: return "SolverDivergence";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::NonSquare: return "NonSquare";
    case ErrorCode::CorruptHeader: return "CorruptHeader";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what, std::optional<int> slice)
    : std::runtime_error(what), code_(code), slice_(slice) {}

Error Error::with_slice(int slice) const {
    std::string msg = "slice " + std::to_string(slice) + "->" + std::to_string(slice + 1) + ": " + what();
    return Error(code_, msg, slice);
}

}  // namespace dynot
