#include "scifig/error.hpp"

namespace scifig {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config: return "ConfigError";
        case ErrorKind::Io: return "IoError";
        case ErrorKind::Format: return "FormatError";
        case ErrorKind::Decompress: return "DecompressError";
        case ErrorKind::Tar: return "TarError";
        case ErrorKind::PathTraversal: return "PathTraversal";
        case ErrorKind::MissingNxml: return "MissingNxml";
        case ErrorKind::MultipleNxml: return "MultipleNxml";
        case ErrorKind::Xml: return "XmlError";
        case ErrorKind::Decode: return "DecodeError";
        case ErrorKind::Hook: return "HookError";
        case ErrorKind::VectorNoHook: return "VectorNoHook";
        case ErrorKind::DimMismatch: return "DimMismatch";
        case ErrorKind::Provider: return "ProviderError";
        case ErrorKind::DuplicateKey: return "DuplicateKey";
        case ErrorKind::AllZero: return "AllZero";
        case ErrorKind::Transport: return "TransportError";
        case ErrorKind::ChecksumMismatch: return "ChecksumMismatch";
    }
    return "Error";
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config:
        case ErrorKind::AllZero:
            return 1;
        case ErrorKind::Io:
        case ErrorKind::Transport:
            return 2;
        default:
            return 3;
    }
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

}  // namespace scifig
