#pragma once

#include <stdexcept>
#include <string>

namespace sconv {

// Error taxonomy used across the library; the CLI maps these onto exit
// codes (InputError -> 2, ConfigError -> 3, NumericError -> 4).

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sconv
