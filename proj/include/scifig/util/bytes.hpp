#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace scifig {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline ByteView as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

inline std::string_view as_chars(ByteView b) {
    return {reinterpret_cast<const char*>(b.data()), b.size()};
}

inline Bytes to_bytes(std::string_view s) {
    auto v = as_bytes(s);
    return {v.begin(), v.end()};
}

Bytes read_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames it into place, so readers never
// observe a partially written file at `path`.
void write_file_atomic(const std::filesystem::path& path, ByteView data);
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

// Pull-style byte stream. read() returns 0 only at end of stream.
class ByteSource {
public:
    virtual ~ByteSource() = default;
    virtual std::size_t read(std::span<std::uint8_t> out) = 0;

    // Reads exactly out.size() bytes unless the stream ends first; returns the
    // number of bytes read.
    std::size_t read_full(std::span<std::uint8_t> out);
};

class MemorySource final : public ByteSource {
public:
    explicit MemorySource(ByteView data) : data_(data) {}
    std::size_t read(std::span<std::uint8_t> out) override;

private:
    ByteView data_;
    std::size_t pos_ = 0;
};

class FileSource final : public ByteSource {
public:
    explicit FileSource(const std::filesystem::path& path);
    ~FileSource() override;
    FileSource(const FileSource&) = delete;
    FileSource& operator=(const FileSource&) = delete;

    std::size_t read(std::span<std::uint8_t> out) override;

private:
    std::FILE* file_ = nullptr;
};

}  // namespace scifig
