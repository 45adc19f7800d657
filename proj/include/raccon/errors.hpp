#pragma once

#include <stdexcept>
#include <string>

namespace raccon {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid parameters, schema violations, inconsistent campaign settings.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed CSV or JSON input. Carries the 1-based row when known.
class ParseError : public Error {
public:
    ParseError(const std::string& what, long row = -1)
        : Error(row >= 0 ? what + " (row " + std::to_string(row) + ")" : what), row_(row) {}
    long row() const noexcept { return row_; }

private:
    long row_;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Model shape, version or file-integrity problems.
class ModelError : public Error {
public:
    using Error::Error;
};

// Non-finite values reaching numeric kernels.
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace raccon
