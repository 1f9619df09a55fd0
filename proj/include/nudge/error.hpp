#pragma once

#include <stdexcept>
#include <string>

namespace nudge {

/// Base class for every error raised by the library. Messages are single-line
/// so the CLI can print them verbatim as its diagnostic.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A caller-supplied argument violates a precondition (shape, range, sign).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable input file.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace nudge
