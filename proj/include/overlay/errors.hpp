#pragma once

#include <stdexcept>
#include <string>

namespace overlay {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Precondition or invariant violation by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

/// Malformed input file (manifest, script, config).
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Filesystem failure (unreadable file, unwritable directory).
class IoError : public Error {
public:
    using Error::Error;
};

/// Transient transport failure; retried by the client with backoff.
class TransportError : public Error {
public:
    using Error::Error;
};

/// Rate-limit signal from the endpoint; retried like a transport failure.
class RateLimitError : public TransportError {
public:
    using TransportError::TransportError;
};

/// Endpoint replied but the payload is not the expected shape. Not retried.
class ProtocolError : public Error {
public:
    ProtocolError(const std::string& what, std::string raw_payload)
        : Error(what), raw(std::move(raw_payload)) {}
    std::string raw;
};

/// Model output could not be parsed into a verdict. Carries the raw text.
class VerdictError : public Error {
public:
    VerdictError(const std::string& what, std::string raw_text)
        : Error(what), raw(std::move(raw_text)) {}
    std::string raw;
};

/// A required template placeholder was not bound.
class RenderError : public Error {
public:
    using Error::Error;
};

/// A sample pool is too small to satisfy a balance request.
class CapacityError : public Error {
public:
    using Error::Error;
};

}  // namespace overlay
