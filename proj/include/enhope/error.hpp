#pragma once

#include <stdexcept>
#include <string>

namespace enhope {

enum class ErrorKind { data, dimension, numeric, config, io, format };

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::data: return "data";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
    case ErrorKind::format: return "format";
    }
    return "unknown";
}

/// Every failure raised by the library. `kind()` is what the CLI prints in
/// its `error[<kind>]:` prefix.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace enhope
