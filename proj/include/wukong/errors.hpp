#pragma once

#include <stdexcept>
#include <string>

namespace wukong {

// Error taxonomy. The CLI maps each class onto its own exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inconsistent shapes, widths or hyperparameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input rows, out-of-range ids, bad labels.
class DataError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced or consumed by a computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A metric that is undefined on the given input (e.g. AUC with one class).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace wukong
