#pragma once

#include <stdexcept>
#include <string>

namespace rpnet {

// Bad argument to a library call.
struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A required input file is missing or unreadable.
struct IngestionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An input file exists but its content violates the expected format.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Binary feature/checkpoint file problems, one type per failure class so
// callers can tell them apart.
struct PersistVersionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PersistTruncatedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PersistChecksumError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// NaN or Inf encountered in numeric state.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API used out of order.
struct StateError : std::logic_error {
    using std::logic_error::logic_error;
};

}  // namespace rpnet
