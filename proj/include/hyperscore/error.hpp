#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hyperscore {

enum class ErrorKind {
    Io,
    Format,
    SizeMismatch,
    UnsupportedDtype,
    UnsupportedVersion,
    Validation,
    Shape,
    Index,
    TooSmall,
    Domain,
    Parse,
    Usage,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::Io: return "io error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::SizeMismatch: return "size mismatch";
    case ErrorKind::UnsupportedDtype: return "unsupported dtype";
    case ErrorKind::UnsupportedVersion: return "unsupported version";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Index: return "index error";
    case ErrorKind::TooSmall: return "too small";
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Usage: return "usage error";
    }
    return "error";
}

/// Every failure raised by the library carries a kind so callers (and tests)
/// can branch on the category without parsing the message.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace hyperscore
