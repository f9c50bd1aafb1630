#pragma once

#include <stdexcept>
#include <string>

namespace retfuse {

// Exit codes reported by the CLI. Keep in sync with README.
enum class ExitCode : int {
  ok = 0,
  config_error = 2,
  data_error = 3,
  numeric_error = 4,
  dependency_error = 5,
  state_error = 6,
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor/layer shape mismatches. Message names the offending layer.
struct ShapeError : DataError {
  using DataError::DataError;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Stale caches, transform-before-fit and similar misuse.
struct StateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A pipeline stage was invoked before its inputs exist.
struct DependencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ExitCode exit_code_for(const std::exception& e);

}  // namespace retfuse
