#pragma once

#include <stdexcept>
#include <string>

namespace multibal {

enum class ErrorKind {
    shape,
    insufficient_data,
    degenerate,
    overlap_violation,
    numeric,
    config,
    io,
};

const char *to_string(ErrorKind kind);

// Single exception type for the library; the kind drives CLI exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string &message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline void require(bool condition, ErrorKind kind, const std::string &message) {
    if (!condition) { throw Error(kind, message); }
}

}  // namespace multibal
