#pragma once

#include <stdexcept>
#include <string>

namespace egoseg {

enum class ErrorKind { InvalidArgument, InvalidInput, Io, Format };

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::Io: return "io";
    case ErrorKind::Format: return "format";
    }
    return "unknown";
}

/// Single exception type for the toolkit; `kind()` lets callers branch without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) fail(kind, what);
}

} // namespace egoseg
