#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace shiftlens {

enum class ErrorKind {
    Format,
    UnsupportedDtype,
    Validation,
    Sidecar,
    Shape,
    EmptyWindow,
    InsufficientBackground,
    EmptyMask,
    Manifest,
    EmptyInput,
    Construction,
    Section,
    Pairing,
    Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every failure the library reports carries a kind so callers (the CLI in
// particular) can map it to an exit code and a machine-parseable line.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace shiftlens
