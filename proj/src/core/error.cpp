#include "ami/core/error.hpp"

namespace ami {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::not_found: return "not_found";
    case ErrorKind::data_integrity: return "data_integrity";
    case ErrorKind::parse: return "parse";
    case ErrorKind::io: return "io";
    case ErrorKind::input: return "input";
    case ErrorKind::stage: return "stage";
    case ErrorKind::conflict: return "conflict";
  }
  return "unknown";
}

}  // namespace ami
