#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace seird {

/// Person counts. Signed so that flow arithmetic can be range-checked.
using count_t = std::int64_t;

/// Raised when parameters, configuration, or data violate a documented
/// invariant. The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised on filesystem problems (missing file, unreadable path).
/// The CLI maps this to exit code 3.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace seird
