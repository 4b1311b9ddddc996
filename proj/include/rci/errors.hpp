#pragma once

#include <stdexcept>
#include <string>

namespace rci {

/// Base class for every error raised by the library. `exit_code()` is the
/// process exit status the command-line tool reports for it.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual int exit_code() const { return 1; }
};

class DimensionError : public Error {
public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

class InvalidArgument : public Error {
public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

/// An arm of the treatment is empty (or a quantity that needs both arms is
/// degenerate).
class PositivityError : public Error {
public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

class ParseError : public Error {
public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

class IoError : public Error {
public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

class NumericalFailure : public Error {
public:
  NumericalFailure(const std::string& what, long iteration = -1)
      : Error(iteration >= 0 ? what + " (iteration " + std::to_string(iteration) + ")" : what),
        iteration_(iteration) {}
  int exit_code() const override { return 3; }
  long iteration() const { return iteration_; }

private:
  long iteration_;
};

} // namespace rci
