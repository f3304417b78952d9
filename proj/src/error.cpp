#include "s2p/error.hpp"

namespace s2p {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid input";
    case ErrorKind::invalid_parameter: return "invalid parameter";
    case ErrorKind::index: return "index error";
    case ErrorKind::shape: return "shape error";
    case ErrorKind::contract: return "contract violation";
    case ErrorKind::config: return "config error";
    case ErrorKind::infeasible: return "infeasible";
    case ErrorKind::unparseable: return "unparseable message";
    case ErrorKind::io: return "io error";
  }
  return "error";
}

}  // namespace s2p
