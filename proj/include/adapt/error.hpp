#pragma once

#include <stdexcept>
#include <string>

namespace adapt {

enum class ErrorKind {
    invalid_argument,
    dimension_mismatch,
    empty_dataset,
    unsupported,
    not_trained,
    parse,
    io,
    validation,
};

const char* to_string(ErrorKind kind) noexcept;

// Single exception type for the library; the kind lets callers (and the CLI
// exit-code mapping) distinguish contract violations from runtime failures.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

}  // namespace adapt
