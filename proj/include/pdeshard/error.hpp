#pragma once

#include <stdexcept>
#include <string>

namespace pdeshard {

// Root of every error the library throws. Subclasses let callers tell apart
// IO problems, bad files, bad configuration and numerical breakdown.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Wrong magic or unsupported version.
class FormatError : public Error {
 public:
  using Error::Error;
};

// File ended before the header-declared payload.
class TruncatedError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CflError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered in a solver state, a loss, or a rollout.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ExchangeTimeout : public Error {
 public:
  using Error::Error;
};

// Raised in ranks blocked on an exchange after another rank failed.
class ExchangeAborted : public Error {
 public:
  using Error::Error;
};

// Failure inside a worker; carries the rank it happened on.
class WorkerError : public Error {
 public:
  WorkerError(int rank, const std::string& what)
      : Error("rank " + std::to_string(rank) + ": " + what), rank_(rank) {}
  int rank() const noexcept { return rank_; }

 private:
  int rank_;
};

}  // namespace pdeshard
