#pragma once

#include <memory>

#include "scifig/util/bytes.hpp"

namespace scifig {

inline bool has_gzip_magic(ByteView data) {
    return data.size() >= 2 && data[0] == 0x1f && data[1] == 0x8b;
}

// Throws Error(Decompress) on a corrupt or truncated stream.
Bytes gunzip(ByteView data);

// Deterministic output: no file name, zero mtime.
Bytes gzip_compress(ByteView data, int level = 6);

// Streaming gzip decoder over another source.
class GzipSource final : public ByteSource {
public:
    explicit GzipSource(ByteSource& upstream);
    ~GzipSource() override;
    GzipSource(const GzipSource&) = delete;
    GzipSource& operator=(const GzipSource&) = delete;

    std::size_t read(std::span<std::uint8_t> out) override;

private:
    struct State;
    std::unique_ptr<State> state_;
};

}  // namespace scifig
