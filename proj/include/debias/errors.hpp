#pragma once

#include <stdexcept>
#include <string>

namespace debias {

// Process exit codes shared by every command.
enum class ExitCode : int {
    ok = 0,
    config = 2,
    data = 3,
    numeric = 4,
    degenerate_shallow = 5,
};

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual ExitCode exit_code() const noexcept = 0;
};

class ConfigError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::config; }
};

class DataError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::data; }
};

// Structurally valid input whose shape does not match what was expected.
class SchemaError : public DataError {
public:
    using DataError::DataError;
};

class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t offset)
        : DataError(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class IoError : public DataError {
public:
    using DataError::DataError;
};

class NumericError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::numeric; }
};

}  // namespace debias
