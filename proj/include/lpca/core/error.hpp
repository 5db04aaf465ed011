#pragma once

#include <stdexcept>
#include <string>

namespace lpca {

// Error families map one-to-one onto CLI exit codes (see tools/lpca.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or configuration contract violated by a caller.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed files, manifests, checkpoints.
class DataError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace lpca
