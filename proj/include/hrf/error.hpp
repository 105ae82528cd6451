#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hrf {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed input record. Carries the 1-based line number when known.
class ParseError : public Error {
  public:
    ParseError(std::string const &source, std::size_t line, std::string const &what)
        : Error(source + ":" + std::to_string(line) + ": " + what), m_line(line)
    {}

    [[nodiscard]] std::size_t line() const noexcept { return m_line; }

  private:
    std::size_t m_line;
};

/// Data that parses but violates a cross-record invariant (duplicate ids,
/// history that references documents the corpus does not have, ...).
class IntegrityError : public Error {
  public:
    using Error::Error;
};

/// A value outside its permitted domain, e.g. a relevance grade of 3.
class RangeError : public Error {
  public:
    using Error::Error;
};

/// Caller violated an operation's precondition.
class PreconditionError : public Error {
  public:
    using Error::Error;
};

/// Invalid or infeasible configuration.
class ConfigError : public Error {
  public:
    using Error::Error;
};

} // namespace hrf
