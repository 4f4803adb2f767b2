#pragma once

#include <stdexcept>
#include <string>

namespace bmgf {

// Error categories. Callers catch the subtype they can act on.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape does not conform to a primitive's contract.
struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// A precondition of an internal API was violated.
struct ContractError : Error {
    explicit ContractError(const std::string& msg) : Error(msg) {}
};

// Bad user-facing input (empty argument, position overflow, ...).
struct InputError : Error {
    explicit InputError(const std::string& msg) : Error(msg) {}
};

// Malformed dataset rows or labels.
struct DataError : Error {
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// Invalid or inconsistent configuration.
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace bmgf
