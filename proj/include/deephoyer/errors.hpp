#pragma once

#include <stdexcept>
#include <string>

namespace deephoyer {

// Error categories used across the library. Each maps to a distinct failure
// mode so callers (and the CLI exit-code mapping) can tell them apart.

struct DimensionError : std::invalid_argument {
    explicit DimensionError(const std::string& msg) : std::invalid_argument(msg) {}
};

struct ArgumentError : std::invalid_argument {
    explicit ArgumentError(const std::string& msg) : std::invalid_argument(msg) {}
};

// All-zero input (or too few elements) where a ratio of norms is undefined.
struct DegenerateInputError : std::invalid_argument {
    explicit DegenerateInputError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Group scheme does not match the tensor it is applied to.
struct SchemeError : std::invalid_argument {
    explicit SchemeError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Malformed file contents (bad magic, truncation); message carries the offset.
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem-level failure; message carries the path.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Configuration file rejected by schema validation.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace deephoyer
