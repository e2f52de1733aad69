#pragma once

#include <stdexcept>
#include <string>

namespace vocada {

/// Malformed or inconsistent input data. Maps to CLI exit code 1.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Model endpoint failure after retries. Maps to CLI exit code 2.
class GatewayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vocada
