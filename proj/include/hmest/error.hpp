#pragma once

#include <stdexcept>
#include <string>

namespace hmest {

enum class ErrorKind {
  NoData,
  MalformedRow,
  BadCell,
  BadParameter,
  CovarianceInestimable,
  NoCompleteCases,
  NoEstimableCdf,
  InvalidVariance,
  SingularSystem,
  DegenerateVariance,
  InvalidCorrelation,
  InvalidPopulation,
  InvalidSpec,
  LadderTooShort,
  Io,
};

const char* to_string(ErrorKind kind) noexcept;

// Single exception type for every library failure; the kind drives CLI exit
// codes and test assertions, the message carries the human diagnostic.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace hmest
