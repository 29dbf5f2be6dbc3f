#pragma once

#include <iostream>
#include <stdexcept>
#include <string>

namespace mlfair {

// Errors are split by who is at fault: bad input (files, arguments, shapes)
// versus a numeric failure during training or decomposition. The CLI maps
// these onto exit codes 2 and 3.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline bool& warnings_enabled() {
  static bool enabled = true;
  return enabled;
}

}  // namespace detail

inline void set_warnings_enabled(bool on) { detail::warnings_enabled() = on; }

inline void warn(const std::string& msg) {
  if (detail::warnings_enabled()) std::clog << "[mlfair] warning: " << msg << '\n';
}

}  // namespace mlfair
