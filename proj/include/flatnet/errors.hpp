#pragma once

#include <stdexcept>
#include <string>

namespace flatnet {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Malformed input file: carries the 1-based row and column that failed.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t row, std::size_t column)
        : Error(what), row_(row), column_(column) {}

    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

class ColumnNotFound : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// A dense Hessian was requested above the materialization cap.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// The scaling symmetry only exists for positively homogeneous activations.
class ActivationError : public Error {
public:
    using Error::Error;
};

/// Training loss blew up or went non-finite.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t iteration)
        : Error(what), iteration_(iteration) {}

    std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t iteration_;
};

}  // namespace flatnet
