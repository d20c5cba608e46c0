#pragma once

#include <stdexcept>
#include <string>

namespace hncr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad or unreadable input: files, dimensions, configuration values.
class InputError : public Error {
 public:
  using Error::Error;
};

/// An artifact (checkpoint, neighbor file) does not match the dataset it is used with.
class IncompatibleError : public Error {
 public:
  using Error::Error;
};

/// Training diverged or produced a non-finite value.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace hncr
