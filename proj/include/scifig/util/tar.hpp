#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

#include "scifig/util/bytes.hpp"

namespace scifig {

enum class TarEntryType { Regular, Directory, Symlink, Hardlink, Other };

struct TarEntry {
    std::string name;
    TarEntryType type = TarEntryType::Regular;
    std::uint64_t size = 0;
    Bytes data;  // populated for regular files only
};

// True when the first 512-byte block is a tar header with a valid checksum,
// or the buffer starts with an end-of-archive marker (two zero blocks).
bool looks_like_tar(ByteView data);

// Sequential ustar/GNU/pax reader. Throws Error(Tar) on truncation or a bad
// header checksum.
class TarReader {
public:
    explicit TarReader(ByteSource& source) : source_(source) {}

    // Next entry, or nullopt at end of archive.
    std::optional<TarEntry> next();

private:
    bool read_block(std::uint8_t* block);
    Bytes read_payload(std::uint64_t size);

    ByteSource& source_;
    bool done_ = false;
};

// Deterministic ustar writer: mode 0644, uid/gid 0, mtime 0.
class TarWriter {
public:
    explicit TarWriter(std::ostream& out) : out_(out) {}

    void add_file(const std::string& name, ByteView data);
    void add_file(const std::string& name, std::string_view data) { add_file(name, as_bytes(data)); }
    void add_entry(const std::string& name, TarEntryType type, ByteView data, const std::string& link = {});
    void finish();

private:
    void write_long_name(const std::string& name);

    std::ostream& out_;
    bool finished_ = false;
};

}  // namespace scifig
