#pragma once
#include <stdexcept>
#include <string>

namespace flowmine {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Malformed input record; the message carries source, line and field.
class ParseError : public Error {
public:
    using Error::Error;
};

// Precondition or invariant violation on in-memory values.
class ValidationError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Completion or embedding service failure after retries.
class ServiceError : public Error {
public:
    using Error::Error;
};

// Completion response that could not be turned into a canonical form.
class UnparseableResponse : public ServiceError {
public:
    UnparseableResponse(const std::string& what, std::string raw)
        : ServiceError(what), raw_(std::move(raw)) {}
    const std::string& raw() const noexcept { return raw_; }

private:
    std::string raw_;
};

class EmbeddingError : public Error {
public:
    using Error::Error;
};

class GraphError : public Error {
public:
    using Error::Error;
};

// Path search exceeded its configured node or state budget.
class BoundError : public Error {
public:
    using Error::Error;
};

} // namespace flowmine
