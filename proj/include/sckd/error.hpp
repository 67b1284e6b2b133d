#pragma once

#include <stdexcept>
#include <string>

namespace sckd {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid user-supplied configuration (bad hyperparameter, bad dimensions).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config error: " + what) {}
};

// An internal API contract was violated (shape mismatch, out-of-range index).
class ContractError : public Error {
public:
    explicit ContractError(const std::string& what) : Error("contract error: " + what) {}
};

// Non-finite values where finite ones are required.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error("numeric error: " + what) {}
};

// Malformed input data (CSV cells, rows).
class ParseError : public Error {
public:
    explicit ParseError(const std::string& what) : Error("parse error: " + what) {}
};

// Structurally valid input that does not match the declared schema.
class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& what) : Error("schema error: " + what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("io error: " + what) {}
};

}  // namespace sckd
