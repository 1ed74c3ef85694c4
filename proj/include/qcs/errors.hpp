#pragma once

#include <stdexcept>
#include <string>

namespace qcs {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rejection sampling ran out of retries before drawing a strongly connected graph.
class GenerationError : public Error {
 public:
  using Error::Error;
};

/// Malformed adjacency, disconnected graph, or a distribution that does not
/// match the graph it is used with.
class TopologyError : public Error {
 public:
  using Error::Error;
};

class InvalidInitialization : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// A mass message was handed to a node it is not addressed to.
class RoutingError : public Error {
 public:
  using Error::Error;
};

/// A runtime audit (conservation, vote window, flag simultaneity) failed.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

class CapacityExceeded : public Error {
 public:
  using Error::Error;
};

class DegenerateInstance : public Error {
 public:
  using Error::Error;
};

/// Bad experiment configuration; `field()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what),
        field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace qcs
