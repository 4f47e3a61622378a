#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace simgraph {

// Base of every error raised by the library. The CLI maps the concrete
// subclass to an exit code, so keep the hierarchy flat.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class ParseError : public ValidationError {
public:
    ParseError(const std::string& what, std::size_t byte_offset)
        : ValidationError(what + " (at byte " + std::to_string(byte_offset) + ")"),
          byte_offset_(byte_offset) {}

    std::size_t byte_offset() const noexcept { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

class ReferentialIntegrityError : public ValidationError {
public:
    explicit ReferentialIntegrityError(const std::string& id)
        : ValidationError("unknown entity id '" + id + "'"), id_(id) {}

    const std::string& id() const noexcept { return id_; }

private:
    std::string id_;
};

class NotFoundError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class CollisionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ConfigurationError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class IoError : public Error {
public:
    IoError(const std::string& what, const std::string& path)
        : Error(what + ": " + path), path_(path) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class NumericError : public Error {
public:
    using Error::Error;
};

// Raised when a closed-form expression hits a zero denominator.
class SingularityError : public NumericError {
public:
    using NumericError::NumericError;
};

class NumericDivergenceError : public NumericError {
public:
    NumericDivergenceError(const std::string& stage, int step)
        : NumericError("non-finite values during " + stage + " at step " + std::to_string(step)),
          step_(step) {}

    int step() const noexcept { return step_; }

private:
    int step_;
};

}  // namespace simgraph
