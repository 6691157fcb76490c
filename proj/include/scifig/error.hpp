#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace scifig {

// Every fatal condition raised by the library carries one of these kinds.
// Per-item rejections (a figure without a caption, an undecodable image) are
// not errors; they travel as reason codes in result structures.
enum class ErrorKind {
    Config,
    Io,
    Format,
    Decompress,
    Tar,
    PathTraversal,
    MissingNxml,
    MultipleNxml,
    Xml,
    Decode,
    Hook,
    VectorNoHook,
    DimMismatch,
    Provider,
    DuplicateKey,
    AllZero,
    Transport,
    ChecksumMismatch,
};

std::string_view to_string(ErrorKind kind);

// CLI exit code for an error that escapes to the top level:
// 1 = usage/config, 2 = I/O, 3 = data format.
int exit_code_for(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace scifig
