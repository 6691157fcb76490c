#include <array>
#include <cstdint>

#include "scifig/error.hpp"
#include "scifig/image.hpp"

namespace scifig::image {

namespace {

[[noreturn]] void fail(const char* what) { throw Error(ErrorKind::Decode, std::string("gif: ") + what); }

class Reader {
public:
    explicit Reader(ByteView b) : b_(b) {}

    std::uint8_t u8() {
        if (pos_ >= b_.size()) fail("truncated");
        return b_[pos_++];
    }
    std::uint16_t u16() {
        const std::uint16_t lo = u8();
        return static_cast<std::uint16_t>(lo | (u8() << 8));
    }
    ByteView take(std::size_t n) {
        if (b_.size() - pos_ < n) fail("truncated");
        const ByteView out = b_.subspan(pos_, n);
        pos_ += n;
        return out;
    }
    // Concatenated payload of a data sub-block chain.
    Bytes sub_blocks() {
        Bytes out;
        for (;;) {
            const std::uint8_t len = u8();
            if (len == 0) return out;
            const ByteView chunk = take(len);
            out.insert(out.end(), chunk.begin(), chunk.end());
        }
    }
    void skip_sub_blocks() {
        for (;;) {
            const std::uint8_t len = u8();
            if (len == 0) return;
            take(len);
        }
    }

private:
    ByteView b_;
    std::size_t pos_ = 0;
};

using Palette = std::vector<std::array<std::uint8_t, 3>>;

Palette read_palette(Reader& r, int size_bits) {
    Palette p(std::size_t{1} << (size_bits + 1));
    for (auto& entry : p) {
        const ByteView rgb = r.take(3);
        entry = {rgb[0], rgb[1], rgb[2]};
    }
    return p;
}

// Variable-width LZW as used by GIF, LSB-first code packing.
std::vector<std::uint8_t> lzw_decode(const Bytes& data, int min_code_size, std::size_t pixel_count) {
    if (min_code_size < 2 || min_code_size > 8) fail("bad LZW code size");
    constexpr int kMaxCodes = 4096;
    const int clear = 1 << min_code_size;
    const int eoi = clear + 1;
    std::array<std::uint16_t, kMaxCodes> prefix{};
    std::array<std::uint8_t, kMaxCodes> suffix{};
    std::array<std::uint8_t, kMaxCodes> first{};
    for (int i = 0; i < clear; ++i) {
        suffix[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
        first[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
    }
    std::vector<std::uint8_t> out;
    out.reserve(pixel_count);
    std::vector<std::uint8_t> stack;
    int code_size = min_code_size + 1;
    int next = clear + 2;
    int prev = -1;
    std::uint32_t bits = 0;
    int nbits = 0;
    std::size_t pos = 0;
    while (out.size() < pixel_count) {
        while (nbits < code_size) {
            if (pos >= data.size()) fail("truncated image data");
            bits |= static_cast<std::uint32_t>(data[pos++]) << nbits;
            nbits += 8;
        }
        const int code = static_cast<int>(bits & ((1u << code_size) - 1));
        bits >>= code_size;
        nbits -= code_size;
        if (code == clear) {
            code_size = min_code_size + 1;
            next = clear + 2;
            prev = -1;
            continue;
        }
        if (code == eoi) break;
        if (prev < 0) {
            if (code >= clear) fail("bad first code");
            out.push_back(static_cast<std::uint8_t>(code));
            prev = code;
            continue;
        }
        int cur = code;
        stack.clear();
        if (code > next || (code == next && next >= kMaxCodes)) fail("bad code");
        if (code == next) {
            // KwKwK: the new string is prev + first(prev).
            stack.push_back(first[static_cast<std::size_t>(prev)]);
            cur = prev;
        }
        while (cur >= clear) {
            stack.push_back(suffix[static_cast<std::size_t>(cur)]);
            cur = prefix[static_cast<std::size_t>(cur)];
        }
        stack.push_back(static_cast<std::uint8_t>(cur));
        const std::uint8_t head = static_cast<std::uint8_t>(cur);
        for (auto it = stack.rbegin(); it != stack.rend() && out.size() < pixel_count; ++it) out.push_back(*it);
        if (next < kMaxCodes) {
            prefix[static_cast<std::size_t>(next)] = static_cast<std::uint16_t>(prev);
            suffix[static_cast<std::size_t>(next)] = head;
            first[static_cast<std::size_t>(next)] = first[static_cast<std::size_t>(prev)];
            ++next;
            if (next == (1 << code_size) && code_size < 12) ++code_size;
        }
        prev = code;
    }
    if (out.size() < pixel_count) fail("image data ends early");
    return out;
}

// Row order of an interlaced frame: passes starting at 0, 4, 2, 1.
std::vector<int> interlaced_rows(int height) {
    std::vector<int> rows;
    rows.reserve(static_cast<std::size_t>(height));
    constexpr int kStart[4] = {0, 4, 2, 1};
    constexpr int kStep[4] = {8, 8, 4, 2};
    for (int pass = 0; pass < 4; ++pass) {
        for (int y = kStart[pass]; y < height; y += kStep[pass]) rows.push_back(y);
    }
    return rows;
}

}  // namespace

Raster decode_gif(ByteView bytes) {
    Reader r(bytes);
    const ByteView sig = r.take(6);
    const std::string_view header(reinterpret_cast<const char*>(sig.data()), 6);
    if (header != "GIF87a" && header != "GIF89a") fail("bad signature");
    int screen_w = r.u16();
    int screen_h = r.u16();
    const std::uint8_t flags = r.u8();
    r.u8();  // background colour index; the canvas is flattened over white instead
    r.u8();  // pixel aspect ratio
    Palette global;
    if (flags & 0x80) global = read_palette(r, flags & 0x07);

    int transparent = -1;
    for (;;) {
        const std::uint8_t block = r.u8();
        if (block == 0x3B) fail("no image");
        if (block == 0x21) {
            const std::uint8_t label = r.u8();
            if (label == 0xF9) {
                const Bytes gce = r.sub_blocks();
                if (gce.size() >= 4 && (gce[0] & 0x01)) transparent = gce[3];
            } else {
                r.skip_sub_blocks();
            }
            continue;
        }
        if (block != 0x2C) fail("unexpected block");
        const int left = r.u16();
        const int top = r.u16();
        const int w = r.u16();
        const int h = r.u16();
        const std::uint8_t iflags = r.u8();
        Palette local;
        if (iflags & 0x80) local = read_palette(r, iflags & 0x07);
        const Palette& palette = (iflags & 0x80) ? local : global;
        if (palette.empty()) fail("no colour table");
        if (w == 0 || h == 0) fail("empty frame");
        if (screen_w == 0 || screen_h == 0) {
            screen_w = left + w;
            screen_h = top + h;
        }
        const int min_code = r.u8();
        const Bytes data = r.sub_blocks();
        const auto indices = lzw_decode(data, min_code, static_cast<std::size_t>(w) * h);

        Raster out(screen_w, screen_h);
        std::fill(out.pixels.begin(), out.pixels.end(), 255);
        const std::vector<int> rows =
            (iflags & 0x40) ? interlaced_rows(h) : [h] {
                std::vector<int> v(static_cast<std::size_t>(h));
                for (int i = 0; i < h; ++i) v[static_cast<std::size_t>(i)] = i;
                return v;
            }();
        for (int row = 0; row < h; ++row) {
            const int y = top + rows[static_cast<std::size_t>(row)];
            if (y >= screen_h) continue;
            for (int col = 0; col < w; ++col) {
                const int x = left + col;
                if (x >= screen_w) continue;
                const int idx = indices[static_cast<std::size_t>(row) * w + col];
                if (idx == transparent) continue;
                std::uint8_t* q = out.at(x, y);
                if (static_cast<std::size_t>(idx) < palette.size()) {
                    const auto& c = palette[static_cast<std::size_t>(idx)];
                    q[0] = c[0];
                    q[1] = c[1];
                    q[2] = c[2];
                } else {
                    q[0] = q[1] = q[2] = 0;
                }
            }
        }
        return out;
    }
}

}  // namespace scifig::image
