#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace selpred {

/// Error categories. The CLI maps these onto exit codes.
enum class ErrorKind {
    Parse,
    Validation,
    Integrity,
    Io,
    Domain,
    Config,
    DegenerateInput,
    Statistics,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Malformed record or manifest syntax. Carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(std::size_t line_number, const std::string& message)
        : Error(ErrorKind::Parse, "line " + std::to_string(line_number) + ": " + message),
          line_number_(line_number) {}

    std::size_t line_number() const noexcept { return line_number_; }

private:
    std::size_t line_number_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& message) : Error(ErrorKind::Validation, message) {}
};

class IntegrityError : public Error {
public:
    explicit IntegrityError(const std::string& message) : Error(ErrorKind::Integrity, message) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error(ErrorKind::Io, message) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& message) : Error(ErrorKind::Domain, message) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error(ErrorKind::Config, message) {}
};

/// Raised when a metric is undefined for its input (e.g. AUROC on one class).
class DegenerateInputError : public Error {
public:
    explicit DegenerateInputError(const std::string& message)
        : Error(ErrorKind::DegenerateInput, message) {}
};

class StatisticsError : public Error {
public:
    explicit StatisticsError(const std::string& message) : Error(ErrorKind::Statistics, message) {}
};

}  // namespace selpred
