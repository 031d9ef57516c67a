#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dpc {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

// Caller passed something that breaks a documented precondition
// (e.g. a non-Hermitian matrix to hermitian_eig).
class ContractViolation : public Error {
public:
    using Error::Error;
};

class NotPsd : public Error {
public:
    explicit NotPsd(double min_eigenvalue)
        : Error("operator is not positive semidefinite (min eigenvalue " +
                std::to_string(min_eigenvalue) + ")"),
          min_eigenvalue_(min_eigenvalue) {}

    double min_eigenvalue() const noexcept { return min_eigenvalue_; }

private:
    double min_eigenvalue_;
};

class NumericalFailure : public Error {
public:
    NumericalFailure(const std::string& what, std::size_t iteration)
        : Error(what + " at iteration " + std::to_string(iteration)), iteration_(iteration) {}

    std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t iteration_;
};

class UndefinedFidelity : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line, std::size_t column, const std::string& source = "")
        : Error((source.empty() ? "" : source + ": ") + "line " + std::to_string(line) + ", column " +
                std::to_string(column) + ": " + what),
          message_(what),
          line_(line),
          column_(column) {}

    const std::string& message() const noexcept { return message_; }
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

    ParseError in(const std::string& source) const { return {message_, line_, column_, source}; }

private:
    std::string message_;
    std::size_t line_;
    std::size_t column_;
};

// Well-formed document with missing or mistyped fields.
class SchemaError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    IoError(const std::string& what, const std::string& path)
        : Error(what + ": " + path), path_(path) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

}  // namespace dpc
