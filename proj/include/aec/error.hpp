#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace aec {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Input failed a domain check; `field()` names the offending input when known.
class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& what)
        : Error(what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

/// A persisted document could not be decoded.
class ParseError : public Error {
public:
    using Error::Error;
};

}  // namespace aec
