#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace shb {

enum class Errc {
    InvalidArgument,
    DimensionMismatch,
    NonSquare,
    AsymmetryExceedsTolerance,
    NoConvergence,
    Inconsistent,
    AllZero,
    ZeroRow,
    NonFinite,
    OutOfRange,
    NotAdmissible,
    InsufficientReplications,
    MalformedLine,
    NonMonotoneIndices,
    EmptyFile,
    ChecksumMismatch,
    Io,
};

std::string_view to_string(Errc code) noexcept;

// Every failure in the library surfaces as shb::Error. `position` carries the
// iteration index (NonFinite) or the 1-based line number (parser errors).
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message,
          std::optional<std::size_t> position = std::nullopt);

    Errc code() const noexcept { return code_; }
    std::optional<std::size_t> position() const noexcept { return position_; }

private:
    Errc code_;
    std::optional<std::size_t> position_;
};

}  // namespace shb
