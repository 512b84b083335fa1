#pragma once

#include <stdexcept>
#include <string>

namespace partshot {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension or shape disagreement between two objects that must agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Bad dataset layout, undecodable image, or impossible split request.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A label was read while the dataset was locked for unsupervised training.
class LabelAccessError : public Error {
 public:
  using Error::Error;
};

/// Persistence failures: bad magic, hash mismatch, truncated files.
class StoreError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace partshot
