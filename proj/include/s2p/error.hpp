#pragma once

#include <stdexcept>
#include <string>

namespace s2p {

enum class ErrorKind {
  invalid_input,
  invalid_parameter,
  index,
  shape,
  contract,
  config,
  infeasible,
  unparseable,
  io,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace s2p
