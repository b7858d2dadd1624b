#pragma once

#include <stdexcept>
#include <string>

namespace cxrflag {

// Failure classes map onto distinct CLI exit codes (see exit_code()).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or command-line arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// Generation service or judge backend failure.
class BackendError : public Error {
 public:
  using Error::Error;
};

// A judge response that failed validation, with the raw text attached.
class JudgeResponseError : public BackendError {
 public:
  JudgeResponseError(const std::string& what, std::string raw)
      : BackendError(what), raw_(std::move(raw)) {}
  const std::string& raw_response() const { return raw_; }

 private:
  std::string raw_;
};

// Replay-only lookup that found no recorded entry.
class CacheMissError : public BackendError {
 public:
  using BackendError::BackendError;
};

// Calibration with no feasible threshold for the requested alpha.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

enum class ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kConfig = 2,
  kData = 3,
  kBackend = 4,
  kCalibration = 5,
};

}  // namespace cxrflag
