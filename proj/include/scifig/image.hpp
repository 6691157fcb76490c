#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scifig/ingest.hpp"
#include "scifig/util/bytes.hpp"

namespace scifig::image {

// 8-bit interleaved RGB.
struct Raster {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    Raster() = default;
    Raster(int w, int h);

    std::uint8_t* at(int x, int y) { return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const std::uint8_t* at(int x, int y) const {
        return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }
    bool operator==(const Raster&) const = default;
};

inline constexpr int kTargetSize = 512;
inline constexpr int kDefaultJpegQuality = 90;

// External rasterizer for pdf/eps/ps. The command runs under /bin/sh with
// {input}, {output} and {maxdim} replaced by shell-quoted values; it must
// write a PNG or JPEG to {output}.
struct RasterizerHook {
    std::string command;
    std::chrono::milliseconds timeout{std::chrono::seconds(60)};
    int max_dim = kTargetSize;
};

// Flattens straight alpha over white: round((a*src + (255-a)*255) / 255).
inline std::uint8_t composite_over_white(std::uint8_t src, std::uint8_t alpha) {
    return static_cast<std::uint8_t>((alpha * src + (255 - alpha) * 255 + 127) / 255);
}

// Native decoders. Each throws Error(Decode) for corrupt or truncated data.
Raster decode_jpeg(ByteView bytes);
Raster decode_png(ByteView bytes);
Raster decode_gif(ByteView bytes);  // first frame

// Decodes by content signature, falling back to the declared format.
// Vector formats go through the hook: Error(VectorNoHook) without one,
// Error(Hook) when it fails or times out.
Raster decode_image(ByteView bytes, ingest::ImageFormat format, const std::optional<RasterizerHook>& hook);

struct Size {
    int width = 0;
    int height = 0;
    bool operator==(const Size&) const = default;
};

// Longest side scaled to `target` with the short side rounded to nearest
// (at least 1). Images already within the target are unchanged.
Size target_size(int width, int height, int target = kTargetSize);

// Area-averaging downscale to target_size.
Raster resize_to_target(const Raster& img, int target = kTargetSize);

// Baseline JPEG, 4:2:0, integer DCT, standard Huffman tables, no metadata.
Bytes encode_jpeg(const Raster& img, int quality = kDefaultJpegQuality);

// Encoder identity recorded next to every emitted image.
std::string codec_description(int quality = kDefaultJpegQuality);

}  // namespace scifig::image
