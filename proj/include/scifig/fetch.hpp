#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace scifig::fetch {

struct AcquisitionEntry {
    std::string uri;  // http(s)://, file:// or a local path
    std::optional<std::string> expected_sha256;
    std::string dest;  // relative to the output directory
    std::optional<std::uint64_t> size_bytes;
};

// JSONL with fields uri, dest, and optional sha256 and size_bytes. Throws
// Error(Format) for malformed lines and Error(Config) for duplicate or
// escaping destinations.
std::vector<AcquisitionEntry> read_acquisition_manifest(const std::filesystem::path& path);

enum class FetchStatus { Ok, ChecksumMismatch, TransportError, Exhausted };

std::string_view to_string(FetchStatus status);

struct FetchResult {
    std::string dest;
    std::string uri;
    FetchStatus status = FetchStatus::Ok;
    int attempts = 0;
    std::uint64_t bytes_transferred = 0;  // payload bytes moved in this run
    std::optional<std::string> sha256;
    std::string message;
};

struct FetchOptions {
    int parallelism = 4;
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
    double backoff_factor = 2.0;
    std::chrono::seconds connect_timeout{30};
    // Relative local paths in the manifest resolve against this directory.
    std::filesystem::path base_dir = ".";
};

// Downloads or copies every entry into `out_dir`. Data lands in
// "<dest>.part" and is renamed once complete and verified; an existing
// .part is resumed from its length. A checksum mismatch leaves the data at
// "<dest>.bad". Never throws for per-entry failures.
std::vector<FetchResult> fetch_all(const std::vector<AcquisitionEntry>& entries, const std::filesystem::path& out_dir,
                                   const FetchOptions& options = {});

void write_fetch_report(const std::vector<FetchResult>& results, const std::filesystem::path& path);

}  // namespace scifig::fetch
