#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace powerdiag {

enum class ErrorKind {
    NonFiniteSample,
    EmptySummary,
    ZeroSignalPower,
    ZeroCandidatePower,
    DegenerateWindow,
    InvalidSpec,
    NoClosedForm,
    EmptyInput,
    InvalidArgument,
    ParseError,
    IoError,
};

[[nodiscard]] constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::NonFiniteSample: return "NonFiniteSample";
        case ErrorKind::EmptySummary: return "EmptySummary";
        case ErrorKind::ZeroSignalPower: return "ZeroSignalPower";
        case ErrorKind::ZeroCandidatePower: return "ZeroCandidatePower";
        case ErrorKind::DegenerateWindow: return "DegenerateWindow";
        case ErrorKind::InvalidSpec: return "InvalidSpec";
        case ErrorKind::NoClosedForm: return "NoClosedForm";
        case ErrorKind::EmptyInput: return "EmptyInput";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

/// Single exception type for the library. `position()` carries the sample
/// index (NonFiniteSample, DegenerateWindow) or the 1-based line number
/// (ParseError) when one applies.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what,
          std::optional<std::size_t> position = std::nullopt)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what),
          kind_(kind), position_(position) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
    [[nodiscard]] std::optional<std::size_t> position() const noexcept { return position_; }

private:
    ErrorKind kind_;
    std::optional<std::size_t> position_;
};

}  // namespace powerdiag
