#pragma once

#include <stdexcept>
#include <string>

namespace semloc {

/// Error categories shared by the whole toolkit. The C API and the CLI map
/// these onto status/exit codes, so keep the set closed.
enum class Errc {
    invalid_argument,
    degenerate_input,
    format_error,
    version_error,
    insufficient,
    empty_ground,
    no_overlap,
    too_short,
    io_error,
    numeric_error,
};

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Error(Errc code, const std::string& what, int line)
        : std::runtime_error(what + " (line " + std::to_string(line) + ")"), code_(code), line_(line) {}

    Errc code() const { return code_; }
    int line() const { return line_; }  // -1 when not tied to an input line

private:
    Errc code_;
    int line_ = -1;
};

}  // namespace semloc
