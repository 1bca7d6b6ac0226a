#pragma once

#include <stdexcept>
#include <string>

namespace icred {

// Shape disagreement between operands.
struct DimError : std::runtime_error {
  explicit DimError(const std::string& msg) : std::runtime_error(msg) {}
};

// Input outside the operation's domain (empty vector, empty split, ...).
struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// Broken caller contract (non-scalar loss, unknown interlocutor, ...).
struct ContractError : std::runtime_error {
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad configuration: missing files, invalid keys, impossible settings.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite value produced or supplied.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// File read/write failure.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace icred
