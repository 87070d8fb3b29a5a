#pragma once

#include <stdexcept>
#include <string>

namespace decsim {

/// Invalid argument to a library operation (bad sizes, out-of-range ids).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Anything wrong with input data: unreadable files, malformed contents,
/// not enough samples to satisfy a partition.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public DataError {
 public:
  FormatError(std::string field, const std::string& what)
      : DataError(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class CapacityError : public DataError {
 public:
  using DataError::DataError;
};

/// A metric asked for something the frame cannot provide (empty node set,
/// zero denominator, round not recorded).
class MetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace decsim
