#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mwand {

/// Malformed input text (mesh records, JSON documents).
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Input parsed but violates a structural invariant (index range, empty mesh).
class StructuralError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Binary or sidecar layout does not match its declared header.
class FormatError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Values are structurally fine but unusable (NaN, Inf).
class DataError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or option combination.
class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Unknown mesh or part.
class NotFoundError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Request is well-formed but semantically invalid (e.g. empty query set).
class RequestError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Resource exists but is not in a state that allows the operation.
class ConflictError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace mwand
