/**
 * @file error.hpp
 * @brief Exception types shared by every pgnn module.
 *
 * Each exception carries a category so that command-line front ends can map
 * failures onto stable exit codes without string matching.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace pgnn {

enum class ErrorKind {
    InvalidInput,   ///< non-finite or out-of-domain argument
    Shape,          ///< dimension mismatch between arrays / grids / params
    Config,         ///< invalid configuration value
    Data,           ///< missing or malformed data file
    Numerical       ///< non-finite loss or gradient during training
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct InvalidInputError : Error {
    explicit InvalidInputError(const std::string& w) : Error(ErrorKind::InvalidInput, w) {}
};
struct ShapeError : Error {
    explicit ShapeError(const std::string& w) : Error(ErrorKind::Shape, w) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error(ErrorKind::Config, w) {}
};
struct DataError : Error {
    explicit DataError(const std::string& w) : Error(ErrorKind::Data, w) {}
};
struct NumericalError : Error {
    explicit NumericalError(const std::string& w) : Error(ErrorKind::Numerical, w) {}
};

} // namespace pgnn
