#include "multibal/errors.hpp"

namespace multibal {

const char *to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::shape: return "shape";
        case ErrorKind::insufficient_data: return "insufficient_data";
        case ErrorKind::degenerate: return "degenerate";
        case ErrorKind::overlap_violation: return "overlap_violation";
        case ErrorKind::numeric: return "numeric";
        case ErrorKind::config: return "config";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

}  // namespace multibal
