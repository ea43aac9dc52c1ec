#pragma once

#include <stdexcept>
#include <string>

namespace randomlab {

// Single exception family for the whole library. Messages are meant to be
// matched on substrings in calling code, so keep them stable.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void check(bool ok, const std::string& msg) {
  if (!ok) fail(msg);
}

}  // namespace randomlab
