#pragma once

#include <stdexcept>
#include <string>

namespace mgmae {

// Error taxonomy used across the toolkit. Everything derives from Error so
// callers can catch one type at the CLI boundary.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shapes that do not line up for the requested operation.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Math domain violations (log of non-positive value, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// Precondition violations: empty sequences, non-scalar losses, ...
class ContractError : public Error {
public:
    using Error::Error;
};

// Token id outside the vocabulary.
class VocabError : public Error {
public:
    using Error::Error;
};

// Invalid experiment configuration (bad key, N < M, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Unreadable or unwritable files.
class IoError : public Error {
public:
    using Error::Error;
};

// Malformed checkpoint (bad magic, truncation, version mismatch).
class FormatError : public Error {
public:
    using Error::Error;
};

// Non-finite values where training must abort with diagnostics.
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace mgmae
