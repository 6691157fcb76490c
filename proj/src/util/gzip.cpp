#include "scifig/util/gzip.hpp"

#include <zlib.h>

#include <array>

#include "scifig/error.hpp"

namespace scifig {

struct GzipSource::State {
    ByteSource& upstream;
    z_stream zs{};
    std::array<std::uint8_t, 1 << 16> in{};
    bool upstream_done = false;
    bool finished = false;

    explicit State(ByteSource& up) : upstream(up) {}
};

GzipSource::GzipSource(ByteSource& upstream) : state_(std::make_unique<State>(upstream)) {
    // 16 + MAX_WBITS: gzip wrapper only.
    if (inflateInit2(&state_->zs, 16 + MAX_WBITS) != Z_OK) {
        throw Error(ErrorKind::Decompress, "inflateInit2 failed");
    }
}

GzipSource::~GzipSource() {
    inflateEnd(&state_->zs);
}

std::size_t GzipSource::read(std::span<std::uint8_t> out) {
    auto& s = *state_;
    if (s.finished || out.empty()) return 0;
    s.zs.next_out = out.data();
    s.zs.avail_out = static_cast<uInt>(out.size());
    while (s.zs.avail_out == out.size()) {
        if (s.zs.avail_in == 0 && !s.upstream_done) {
            const std::size_t n = s.upstream.read(s.in);
            if (n == 0) {
                s.upstream_done = true;
            } else {
                s.zs.next_in = s.in.data();
                s.zs.avail_in = static_cast<uInt>(n);
            }
        }
        const int rc = inflate(&s.zs, Z_NO_FLUSH);
        if (rc == Z_STREAM_END) {
            // Concatenated gzip members are legal; continue if more input follows.
            if (s.zs.avail_in == 0 && !s.upstream_done) {
                const std::size_t n = s.upstream.read(s.in);
                if (n == 0) {
                    s.upstream_done = true;
                } else {
                    s.zs.next_in = s.in.data();
                    s.zs.avail_in = static_cast<uInt>(n);
                }
            }
            if (s.zs.avail_in == 0) {
                s.finished = true;
                break;
            }
            inflateReset(&s.zs);
            continue;
        }
        if (rc == Z_BUF_ERROR && s.upstream_done && s.zs.avail_in == 0) {
            throw Error(ErrorKind::Decompress, "truncated gzip stream");
        }
        if (rc != Z_OK && rc != Z_BUF_ERROR) {
            throw Error(ErrorKind::Decompress, s.zs.msg != nullptr ? s.zs.msg : "corrupt gzip stream");
        }
    }
    return out.size() - s.zs.avail_out;
}

Bytes gunzip(ByteView data) {
    MemorySource mem(data);
    GzipSource gz(mem);
    Bytes out;
    std::array<std::uint8_t, 1 << 16> buf{};
    while (std::size_t n = gz.read(buf)) {
        out.insert(out.end(), buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(n));
    }
    return out;
}

Bytes gzip_compress(ByteView data, int level) {
    z_stream zs{};
    if (deflateInit2(&zs, level, Z_DEFLATED, 16 + MAX_WBITS, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
        throw std::runtime_error("deflateInit2 failed");
    }
    Bytes out(deflateBound(&zs, static_cast<uLong>(data.size())) + 32);
    zs.next_in = const_cast<Bytef*>(data.data());
    zs.avail_in = static_cast<uInt>(data.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = deflate(&zs, Z_FINISH);
    deflateEnd(&zs);
    if (rc != Z_STREAM_END) {
        throw std::runtime_error("deflate failed");
    }
    out.resize(zs.total_out);
    return out;
}

}  // namespace scifig
