#pragma once

#include <stdexcept>
#include <string>

namespace axf {

// Error taxonomy mirrored by the C API / CLI exit codes:
// usage (1), validation (2), verification (3).
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

struct DimensionError : ValidationError {
    explicit DimensionError(const std::string& what) : ValidationError(what) {}
};

struct VerificationError : std::runtime_error {
    explicit VerificationError(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr const char* kVersion = "0.1.0";

}  // namespace axf
