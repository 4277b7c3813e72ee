#pragma once

#include <stdexcept>
#include <string>

namespace msg {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Input lies outside the domain of a geometric map (antipodal, off-manifold).
class DomainError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class IngestError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// A user supplied callback broke its contract (e.g. a non-tangent vector field).
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace msg
