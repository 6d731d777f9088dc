#pragma once

#include <stdexcept>
#include <string>

namespace plastinet {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Raised when tensor shapes are invalid for an operation. The message
/// names the operation and the offending dimensions.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

/// Raised for invalid or inconsistent configuration (JSON configs,
/// infeasible budgets, variant mismatches).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// Raised on file format problems. Carries a byte offset when one is known.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg, long long byte_offset = -1)
        : Error(msg), byte_offset_(byte_offset) {}
    long long byte_offset() const { return byte_offset_; }

private:
    long long byte_offset_;
};

} // namespace plastinet
