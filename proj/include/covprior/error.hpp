#pragma once

#include <stdexcept>
#include <string>

namespace covprior {

// Base class for every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

class InvalidDegreesOfFreedom : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class LayoutMismatch : public Error {
 public:
  using Error::Error;
};

class ZeroVariance : public Error {
 public:
  ZeroVariance(const std::string& what, int index = -1) : Error(what), index_(index) {}
  // Offending column (or -1 when not applicable).
  int index() const noexcept { return index_; }

 private:
  int index_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

class NegativeCount : public Error {
 public:
  using Error::Error;
};

class AdaptationFailure : public Error {
 public:
  using Error::Error;
};

class NonFiniteGradient : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace covprior
