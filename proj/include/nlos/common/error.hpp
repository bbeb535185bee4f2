#pragma once

#include <stdexcept>
#include <string>

namespace nlos {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Extents of two operands (or of an operand and a parameter) disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A scalar argument is outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A forward computation produced NaN or Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed bytes in a container or image file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration text, unknown key or invalid value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace nlos
