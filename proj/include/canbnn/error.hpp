#pragma once

#include <stdexcept>
#include <string>

namespace canbnn {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration or arguments. CLI maps this to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent input data. CLI maps this to exit code 3.
class DataError : public Error {
public:
    using Error::Error;
};

// Parse failure carrying the 1-based line number and the offending field.
class ParseError : public DataError {
public:
    ParseError(std::size_t line, std::string field, const std::string& msg)
        : DataError("line " + std::to_string(line) + ", field '" + field + "': " + msg),
          line_(line),
          field_(std::move(field)) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& field() const noexcept { return field_; }

private:
    std::size_t line_;
    std::string field_;
};

// Logic errors that indicate a bug rather than bad input. CLI exit code 4.
class InternalError : public Error {
public:
    using Error::Error;
};

}  // namespace canbnn
