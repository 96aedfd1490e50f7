#pragma once

#include <stdexcept>
#include <string>

namespace symcanon {

// All library failures surface as this type. The message carries enough
// context (node id, field path, parameter name) to locate the problem.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

}  // namespace symcanon
