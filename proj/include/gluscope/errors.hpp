#pragma once

#include <stdexcept>
#include <string>

namespace gluscope {

// Base for every error raised by the library. Subclasses name the failing
// contract so callers (mainly the CLI) can map them to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite input or a value outside a function's mathematical domain.
class DomainError : public Error {
public:
    using Error::Error;
};

// Caller violated a precondition (shape mismatch, config mismatch, ordering).
class ContractError : public Error {
public:
    using Error::Error;
};

// Invalid configuration values.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Bad user input such as an out-of-range token id.
class InputError : public Error {
public:
    using Error::Error;
};

// Tensor archive is missing a tensor or holds the wrong shape or values.
class LoadError : public Error {
public:
    using Error::Error;
};

// Malformed file contents.
class ParseError : public Error {
public:
    using Error::Error;
};

// Invalid value inside an activation stream.
class StreamError : public Error {
public:
    using Error::Error;
};

// Neuron page could not be assembled.
class PageError : public Error {
public:
    using Error::Error;
};

} // namespace gluscope
