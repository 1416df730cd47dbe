#pragma once

#include <stdexcept>
#include <string>

namespace da3d {

// Broad failure classes. The CLI maps each one to a stable exit code.
enum class ErrorClass {
  Config = 2,
  Divergence = 3,
  Data = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what)
      : std::runtime_error(what), class_(cls) {}

  ErrorClass error_class() const noexcept { return class_; }

 private:
  ErrorClass class_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorClass::Config, what) {}
};

class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what)
      : Error(ErrorClass::Divergence, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorClass::Data, what) {}
};

}  // namespace da3d
