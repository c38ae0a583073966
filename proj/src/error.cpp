#include "sekg/error.hpp"

namespace sekg {

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::Argument:
      return 2;
    case ErrorKind::Provider:
      return 3;
    case ErrorKind::Parse:
    case ErrorKind::Structural:
    case ErrorKind::Domain:
      return 4;
  }
  return 4;
}

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Provider: return "provider";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Structural: return "structural";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Argument: return "argument";
  }
  return "unknown";
}

}  // namespace sekg
