#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace perturbeval {

enum class ErrorKind {
    Parameter,
    Dimension,
    Size,
    Backend,
    Data,
    Io,
};

std::string_view to_string(ErrorKind kind);

/// Base class for every error raised by the library. The kind is stable and
/// is what the CLI reports in its machine-readable error line.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ParameterError : public Error {
public:
    explicit ParameterError(const std::string& m) : Error(ErrorKind::Parameter, m) {}
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& m) : Error(ErrorKind::Dimension, m) {}
};

class SizeError : public Error {
public:
    explicit SizeError(const std::string& m) : Error(ErrorKind::Size, m) {}
};

class BackendError : public Error {
public:
    explicit BackendError(const std::string& m) : Error(ErrorKind::Backend, m) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& m) : Error(ErrorKind::Data, m) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& m) : Error(ErrorKind::Io, m) {}
};

}  // namespace perturbeval
