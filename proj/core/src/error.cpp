#include "rusgroup/error.hpp"

namespace rusgroup {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::input:
      return "input";
    case ErrorKind::transport:
      return "transport";
    case ErrorKind::protocol:
      return "protocol";
  }
  return "unknown";
}

}  // namespace rusgroup
