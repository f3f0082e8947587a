#pragma once

#include <stdexcept>
#include <string>

namespace portfolio {

// Malformed configuration, files, or operation arguments. CLI exit code 3.
class InputError : public std::runtime_error {
public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Inconsistent data discovered mid-computation (missing label, unknown id).
class DataError : public InputError {
public:
  explicit DataError(const std::string& what) : InputError(what) {}
};

// No assignment can satisfy the budget. CLI exit code 2.
class InfeasibleError : public std::runtime_error {
public:
  explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace portfolio
