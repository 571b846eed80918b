#pragma once

#include <stdexcept>
#include <string>

namespace rsdflow {

// Shapes of two operands disagree (height, width, channels, kernel dims).
class DimensionError : public std::invalid_argument {
public:
    explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

// A scalar argument is outside its domain (scale 0, lr < 0, empty dataset, ...).
class ArgumentError : public std::invalid_argument {
public:
    explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

// Malformed or truncated file content.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Broken internal invariant (cache miss, batch-size mismatch).
class InternalError : public std::logic_error {
public:
    explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace rsdflow
