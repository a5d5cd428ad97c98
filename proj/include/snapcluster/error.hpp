#pragma once

#include <stdexcept>
#include <string>

namespace snapcluster {

// Every failure raised by the toolkit derives from Error. kind() is a short
// stable token used by the CLI for machine-parsable error lines.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

// Precondition or argument violation.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& message) : Error("validation", message) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error("io", message) {}
};

// Bad magic, truncated payload, unsupported version.
class FormatError : public Error {
public:
    explicit FormatError(const std::string& message) : Error("format", message) {}
};

// NaN coordinates, non-finite values, inconsistent inputs.
class DataError : public Error {
public:
    explicit DataError(const std::string& message) : Error("data", message) {}
};

// Source data does not cover a remap target.
class CoverageError : public Error {
public:
    explicit CoverageError(const std::string& message) : Error("coverage", message) {}
};

}  // namespace snapcluster
