#include "shb/error.hpp"

namespace shb {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NonSquare: return "NonSquare";
    case Errc::AsymmetryExceedsTolerance: return "AsymmetryExceedsTolerance";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::Inconsistent: return "Inconsistent";
    case Errc::AllZero: return "AllZero";
    case Errc::ZeroRow: return "ZeroRow";
    case Errc::NonFinite: return "NonFinite";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::NotAdmissible: return "NotAdmissible";
    case Errc::InsufficientReplications: return "InsufficientReplications";
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::NonMonotoneIndices: return "NonMonotoneIndices";
    case Errc::EmptyFile: return "EmptyFile";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::Io: return "Io";
    }
    return "Unknown";
}

Error::Error(Errc code, const std::string& message, std::optional<std::size_t> position)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      position_(position) {}

}  // namespace shb
