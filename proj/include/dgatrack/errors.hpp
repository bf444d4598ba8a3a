#pragma once

#include <stdexcept>
#include <string>

namespace dgatrack {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A suffix list, dictionary or similar database ended up with no entries.
class EmptyDatabaseError : public Error {
 public:
  using Error::Error;
};

/// The name is itself a public suffix, so there is no registrable label.
class NoPrefixError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

class EmptyGraphError : public Error {
 public:
  using Error::Error;
};

class IterationLimitError : public Error {
 public:
  IterationLimitError(const std::string& what, double eigengap)
      : Error(what), eigengap_(eigengap) {}

  /// Estimated gap between the two leading eigenvalues when iteration stopped.
  double eigengap() const noexcept { return eigengap_; }

 private:
  double eigengap_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A generator was asked for more distinct names than its space holds.
class ExhaustionError : public Error {
 public:
  using Error::Error;
};

/// A file produced by an earlier pipeline stage is absent.
class MissingArtifactError : public IoError {
 public:
  using IoError::IoError;
};

/// No domain survived the pre-clustering filter, or no cluster survived clustering.
class EmptyDiscoveryError : public Error {
 public:
  using Error::Error;
};

}  // namespace dgatrack
