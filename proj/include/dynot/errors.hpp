#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dynot {

enum class ErrorCode {
    ShapeMismatch,
    IncompatibleSize,
    ZeroMass,
    NonPositiveDensity,
    MassMismatch,
    DisconnectedDomain,
    SolverDivergence,
    UnsupportedFormat,
    NonSquare,
    CorruptHeader,
    IoFailure,
    InvalidConfig,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a machine-readable code and,
// for per-slice failures, the index t of the step t -> t+1 that failed.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what, std::optional<int> slice = std::nullopt);

    ErrorCode code() const noexcept { return code_; }
    std::optional<int> slice() const noexcept { return slice_; }

    Error with_slice(int slice) const;

private:
    ErrorCode code_;
    std::optional<int> slice_;
};

}  // namespace dynot
