#pragma once

#include <stdexcept>
#include <string>

namespace kpref {

// Base for every error this library raises on purpose. Callers that just
// want "pipeline failed, print and exit" catch this one type.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file. Message carries file and 1-based line number.
class ParseError : public Error {
public:
    ParseError(const std::string& file, size_t line, const std::string& what)
        : Error(file + ":" + std::to_string(line) + ": " + what) {}
};

// Structurally valid input whose cross-references are broken
// (dangling ids, duplicate ids, missing probe verdicts, ...).
class IntegrityError : public Error {
public:
    using Error::Error;
};

// Query against an id / concept / relation that does not exist.
class LookupError : public Error {
public:
    using Error::Error;
};

// Invalid or incomplete configuration (missing role ids, bad plan file, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Argument outside its documented range (k out of range, sample > pool, ...).
class RangeError : public Error {
public:
    using Error::Error;
};

// Prompt render asked for a slot the context does not provide.
class TemplateError : public Error {
public:
    using Error::Error;
};

// Record does not match the documented schema. Message names the record index.
class SchemaError : public Error {
public:
    using Error::Error;
};

// Missing API key env var or endpoint auth rejection. Never retried.
class CredentialError : public Error {
public:
    using Error::Error;
};

// Transport failure after retries are exhausted. Carries last HTTP status
// (0 when the failure never produced a status, e.g. connect timeout).
class TransportError : public Error {
public:
    TransportError(const std::string& msg, int status_) : Error(msg), status(status_) {}
    int status = 0;
};

} // namespace kpref
