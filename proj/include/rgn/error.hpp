#pragma once

#include <stdexcept>
#include <string>

namespace rgn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

// dF is numerically non-injective; the Gauss-Newton step is undefined.
class IllConditionedJacobian : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::string location)
      : Error(location.empty() ? what : location + ": " + what), location_(std::move(location)) {}
  const std::string& location() const noexcept { return location_; }

 private:
  std::string location_;
};

}  // namespace rgn
