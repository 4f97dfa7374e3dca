#pragma once

#include <stdexcept>
#include <string>

namespace talkmine {

// Bad or inconsistent input data (files, records, annotations). CLI exit 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration value or flag combination. CLI exit 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace talkmine
