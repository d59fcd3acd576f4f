#pragma once

#include <stdexcept>
#include <string>

namespace asd {

// Contract violations: mismatched shapes, bad arguments.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// NaN/Inf detected at an op boundary. Carries the op name.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or out-of-range configuration.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File format problems: bad magic, version mismatch, checksum failure, truncation.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace asd
