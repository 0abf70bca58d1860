#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace entropytest {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller-supplied value violates an operation's precondition.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Malformed sequence payload; carries the 1-based offending position.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t position)
        : Error(what), position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// A source model is ill-formed or lacks the structure an operation needs
/// (e.g. a reducible chain asked for its stationary law).
class ModelError : public Error {
public:
    using Error::Error;
};

/// An exhaustive computation would exceed its enumeration guard.
class CapacityError : public Error {
public:
    using Error::Error;
};

class UnsupportedError : public Error {
public:
    using Error::Error;
};

/// External compressor failed, timed out, or misbehaved.
class CodecError : public Error {
public:
    using Error::Error;
};

/// Experiment or source specification is invalid.
class SpecError : public Error {
public:
    using Error::Error;
};

}  // namespace entropytest
