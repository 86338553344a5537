#include "advxfer/error.hpp"

namespace advxfer {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidDimension: return "invalid-dimension";
    case ErrorKind::kInvalidInput: return "invalid-input";
    case ErrorKind::kDegenerateEmbedding: return "degenerate-embedding";
    case ErrorKind::kUndefinedBaseline: return "undefined-baseline";
    case ErrorKind::kLookup: return "lookup";
    case ErrorKind::kTransport: return "transport";
    case ErrorKind::kProtocol: return "protocol";
    case ErrorKind::kMissingInput: return "missing-input";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

}  // namespace advxfer
