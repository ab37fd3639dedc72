#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fiver {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

// Malformed user-facing text (dataset specs, sizes, config values).
class ParseError : public Error {
public:
    using Error::Error;
};

// Operation invoked on an object in the wrong lifecycle state.
class StateError : public Error {
public:
    using Error::Error;
};

class ProtocolError : public Error {
public:
    ProtocolError(const std::string& what, std::uint64_t offset)
        : Error(what + " at byte " + std::to_string(offset)), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

class HandshakeError : public Error {
public:
    using Error::Error;
};

// Connection-level failure: refused, reset, closed mid-session.
class TransportError : public Error {
public:
    using Error::Error;
};

class TimeoutError : public TransportError {
public:
    using TransportError::TransportError;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace fiver
