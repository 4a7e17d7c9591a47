#ifndef HYPERFC_ERROR_HPP
#define HYPERFC_ERROR_HPP

#include <stdexcept>
#include <string>

namespace hyperfc {

// Base class for every error raised by the library. CLI exit codes are
// derived from the concrete type (see tools/).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shapes do not agree for the requested operation.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Invalid argument value (bad factor, non-scalar loss, ...).
class ArgumentError : public Error {
public:
    using Error::Error;
};

// Out-of-range lookup (embedding code, consumer id, ...).
class IndexError : public Error {
public:
    using Error::Error;
};

// Operation attempted in an invalid state (missing gradients, ...).
class StateError : public Error {
public:
    using Error::Error;
};

// Non-finite values or other numeric failures.
class NumericError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent input data (CSV ingestion, ranges, ...).
class DataError : public Error {
public:
    using Error::Error;
};

// Invalid configuration (ratios, segment lengths, unknown keys, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace hyperfc

#endif
