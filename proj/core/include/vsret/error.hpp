#pragma once

#include <stdexcept>
#include <string>

namespace vsret {

// Every failure raised by the library derives from Error so callers can
// catch one type. The CLI maps IoError to exit code 2 and the rest to 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Near-zero vectors, empty slices, zero-length intervals.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// Out-of-range hyperparameters (tau <= 0, k < 1, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class SamplingError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class DeterminismError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace vsret
