#pragma once

#include <stdexcept>
#include <string>

namespace ncap {

/// Non-finite state produced while integrating the vehicle model.
class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Riccati iteration failed or the LQR configuration is invalid.
class ControllerConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scenario specification is invalid or cannot be realized.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or invariant-violating message on the wire.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Connection, timeout or I/O failure on a byte-stream transport.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ScoringError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreadable or inconsistent configuration / log file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ncap
