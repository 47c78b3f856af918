#pragma once

#include <stdexcept>
#include <string>

namespace scgan {

/// Bad input or configuration. The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

class ShapeError : public ValidationError
{
public:
  using ValidationError::ValidationError;
};

/// Unknown category, item id or similar key.
class LookupError : public ValidationError
{
public:
  using ValidationError::ValidationError;
};

/// NaN/Inf showed up where finite values are required.
class NumericError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Output could not be written. Exit code 1.
class IoError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

}  // namespace scgan
