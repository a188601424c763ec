#pragma once

#include <stdexcept>
#include <string>

namespace intellipred {

/// Base of every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// A file could not be opened, read or written.
class IoError : public Error
{
public:
    using Error::Error;
};

/// Input bytes or text do not follow the expected layout.
class FormatError : public Error
{
public:
    using Error::Error;
};

/// Well-formed input that uses an encoding we do not handle (e.g. 24-bit PCM).
class UnsupportedFormat : public FormatError
{
public:
    using FormatError::FormatError;
};

/// A precondition on values was violated (non-finite samples, rate mismatch, ...).
class ValidationError : public Error
{
public:
    using Error::Error;
};

} // namespace intellipred
