#include "mcrood/error.hpp"

namespace mcrood {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config:
      return "config";
    case ErrorKind::data:
      return "data";
    case ErrorKind::argument:
      return "argument";
    case ErrorKind::shape:
      return "shape";
    case ErrorKind::numeric:
      return "numeric";
    case ErrorKind::io:
      return "io";
  }
  return "unknown";
}

}  // namespace mcrood
