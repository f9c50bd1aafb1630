#include "retfuse/errors.hpp"

namespace retfuse {

ExitCode exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return ExitCode::config_error;
  if (dynamic_cast<const DependencyError*>(&e)) return ExitCode::dependency_error;
  if (dynamic_cast<const DataError*>(&e)) return ExitCode::data_error;
  if (dynamic_cast<const NumericError*>(&e)) return ExitCode::numeric_error;
  if (dynamic_cast<const StateError*>(&e)) return ExitCode::state_error;
  return ExitCode::data_error;
}

}  // namespace retfuse
