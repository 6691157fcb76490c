#include <cmath>

#include "doctest.h"
#include "scifig/error.hpp"
#include "scifig/image.hpp"
#include "support/fixtures.hpp"
#include "support/imagegen.hpp"

using namespace scifig;
using namespace scifig::image;
using ingest::ImageFormat;

namespace {

ErrorKind decode_error_kind(ByteView bytes, ImageFormat fmt, const std::optional<RasterizerHook>& hook = {}) {
    try {
        decode_image(bytes, fmt, hook);
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("decode_image did not throw");
    return ErrorKind::Config;
}

// Independent rounding oracle: real-valued blend, nearest integer.
std::uint8_t blend_oracle(int src, int alpha) {
    const double a = alpha / 255.0;
    return static_cast<std::uint8_t>(std::lround(a * src + (1.0 - a) * 255.0));
}

// Ratio oracle: longest side becomes the target, the other side is the
// nearest integer to side * target / longest (at least 1).
Size size_oracle(int w, int h, int target) {
    if (std::max(w, h) <= target) return {w, h};
    if (w >= h) return {target, std::max(1, static_cast<int>(std::lround(static_cast<double>(h) * target / w)))};
    return {std::max(1, static_cast<int>(std::lround(static_cast<double>(w) * target / h))), target};
}

bool has_marker(const Bytes& b, std::uint8_t marker) {
    for (std::size_t i = 0; i + 1 < b.size(); ++i) {
        if (b[i] == 0xFF && b[i + 1] == marker) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("alpha compositing formula matches the real-valued oracle") {
    for (int a = 0; a <= 255; ++a) {
        for (int s = 0; s <= 255; ++s) {
            REQUIRE(composite_over_white(static_cast<std::uint8_t>(s), static_cast<std::uint8_t>(a)) ==
                    blend_oracle(s, a));
        }
    }
}

TEST_CASE("png with alpha is flattened over white") {
    // 2x2 RGBA fixture: opaque red, transparent green, half blue, 30% gray.
    const std::vector<std::uint8_t> rgba = {255, 0, 0, 255, 0, 255, 0, 0, 0, 0, 255, 128, 100, 100, 100, 77};
    const Raster r = decode_png(testing::encode_png_rgba(2, 2, rgba));
    REQUIRE(r.width == 2);
    REQUIRE(r.height == 2);
    for (int i = 0; i < 4; ++i) {
        for (int c = 0; c < 3; ++c) {
            CHECK(r.pixels[i * 3 + c] == blend_oracle(rgba[i * 4 + c], rgba[i * 4 + 3]));
        }
    }
    CHECK(r.pixels[3] == 255);  // fully transparent pixel is white
    CHECK(r.pixels[4] == 255);
    CHECK(r.pixels[5] == 255);
}

TEST_CASE("100x50 png with alpha decodes to 100x50 rgb") {
    const Raster r = decode_image(testing::make_png(100, 50, 3, testing::PngKind::Rgba), ImageFormat::Png, {});
    CHECK(r.width == 100);
    CHECK(r.height == 50);
    CHECK(r.pixels.size() == 100u * 50u * 3u);
}

TEST_CASE("gray and palette png expand to rgb") {
    for (auto kind : {testing::PngKind::Gray, testing::PngKind::Palette, testing::PngKind::Rgb}) {
        const Raster r = decode_png(testing::make_png(17, 9, 11, kind));
        CHECK(r.width == 17);
        CHECK(r.pixels.size() == 17u * 9u * 3u);
        if (kind == testing::PngKind::Gray) {
            for (int i = 0; i < 17 * 9; ++i) {
                CHECK(r.pixels[i * 3] == r.pixels[i * 3 + 1]);
                CHECK(r.pixels[i * 3] == r.pixels[i * 3 + 2]);
            }
        }
    }
}

TEST_CASE("decode errors") {
    Bytes jpg = testing::make_jpeg(200, 200, 1);
    jpg.resize(jpg.size() / 2);
    CHECK(decode_error_kind(jpg, ImageFormat::Jpg) == ErrorKind::Decode);
    Bytes png = testing::make_png(64, 64, 1);
    png.resize(png.size() / 2);
    CHECK(decode_error_kind(png, ImageFormat::Png) == ErrorKind::Decode);
    CHECK(decode_error_kind(as_bytes("GIF89a"), ImageFormat::Gif) == ErrorKind::Decode);
    CHECK(decode_error_kind(as_bytes("garbage"), ImageFormat::Jpg) == ErrorKind::Decode);
}

TEST_CASE("content signature wins over the declared extension") {
    const Bytes png = testing::make_png(10, 10, 5);
    CHECK(decode_image(png, ImageFormat::Jpg, {}) == decode_png(png));
    // A PDF saved as .png is still vector content.
    CHECK(decode_error_kind(testing::fake_pdf(), ImageFormat::Png) == ErrorKind::VectorNoHook);
}

TEST_CASE("vector formats and the rasterizer hook") {
    CHECK(decode_error_kind(testing::fake_eps(), ImageFormat::Eps) == ErrorKind::VectorNoHook);
    CHECK(decode_error_kind(testing::fake_pdf(), ImageFormat::Pdf) == ErrorKind::VectorNoHook);

    testing::ScratchDir dir("hook");
    const Bytes png = testing::make_png(30, 20, 9);
    write_file_atomic(dir / "r.png", png);
    const std::string src = (dir / "r.png").string();

    SUBCASE("successful hook") {
        RasterizerHook hook{"test -s {input} && test {maxdim} = 512 && cp '" + src + "' {output}"};
        const Raster r = decode_image(testing::fake_eps(), ImageFormat::Eps, hook);
        CHECK(r == decode_png(png));
    }
    SUBCASE("nonzero exit") {
        CHECK(decode_error_kind(testing::fake_pdf(), ImageFormat::Pdf, RasterizerHook{"exit 1"}) == ErrorKind::Hook);
    }
    SUBCASE("timeout") {
        RasterizerHook hook{"sleep 5", std::chrono::milliseconds(200)};
        CHECK(decode_error_kind(testing::fake_pdf(), ImageFormat::Pdf, hook) == ErrorKind::Hook);
    }
    SUBCASE("output that is not an image") {
        RasterizerHook hook{"echo nope > {output}"};
        CHECK(decode_error_kind(testing::fake_pdf(), ImageFormat::Pdf, hook) == ErrorKind::Hook);
    }
}

TEST_CASE("gif decoding") {
    const int w = 7, h = 5;
    std::vector<std::uint8_t> idx(w * h);
    std::vector<std::uint8_t> pal(256 * 3);
    for (int i = 0; i < 256; ++i) {
        pal[i * 3] = static_cast<std::uint8_t>(i);
        pal[i * 3 + 1] = static_cast<std::uint8_t>(255 - i);
        pal[i * 3 + 2] = static_cast<std::uint8_t>(i * 7);
    }
    for (int i = 0; i < w * h; ++i) idx[i] = static_cast<std::uint8_t>((i * 37) % 256);

    const Raster plain = decode_gif(testing::encode_gif(w, h, idx, pal));
    REQUIRE(plain.width == w);
    for (int i = 0; i < w * h; ++i) {
        CHECK(plain.pixels[i * 3] == pal[idx[i] * 3]);
        CHECK(plain.pixels[i * 3 + 1] == pal[idx[i] * 3 + 1]);
        CHECK(plain.pixels[i * 3 + 2] == pal[idx[i] * 3 + 2]);
    }
    CHECK(decode_gif(testing::encode_gif(w, h, idx, pal, -1, true)) == plain);
    CHECK(decode_gif(testing::encode_gif(w, h, idx, pal, -1, false, true)) == plain);

    const Raster transparent = decode_gif(testing::encode_gif(w, h, idx, pal, idx[0]));
    CHECK(transparent.pixels[0] == 255);
    CHECK(transparent.pixels[1] == 255);
    CHECK(transparent.pixels[2] == 255);
    CHECK(transparent.pixels[3] == pal[idx[1] * 3]);
}

TEST_CASE("target size matches the ratio oracle") {
    for (int w = 1; w <= 1400; w += 3) {
        for (int h = 1; h <= 1400; h += 7) {
            const Size got = target_size(w, h);
            const Size want = size_oracle(w, h, kTargetSize);
            if (!(got == want)) {
                INFO(w << "x" << h);
                CHECK(got.width == want.width);
                CHECK(got.height == want.height);
            }
        }
    }
    CHECK(target_size(2000, 1000) == Size{512, 256});
    CHECK(target_size(300, 1200) == Size{128, 512});
    CHECK(target_size(512, 512) == Size{512, 512});
    CHECK(target_size(100, 50) == Size{100, 50});
    CHECK(target_size(100000, 1) == Size{512, 1});
    CHECK(target_size(1023, 1) == Size{512, 1});
}

TEST_CASE("area resize averages exact blocks") {
    Raster src(1024, 6);
    for (int y = 0; y < 6; ++y) {
        for (int x = 0; x < 1024; ++x) {
            std::uint8_t* p = src.at(x, y);
            p[0] = static_cast<std::uint8_t>((x * 3 + y) % 256);
            p[1] = static_cast<std::uint8_t>((x % 2) * 200);
            p[2] = static_cast<std::uint8_t>(y * 40);
        }
    }
    const Raster out = resize_to_target(src);
    REQUIRE(out.width == 512);
    REQUIRE(out.height == 3);
    for (int y = 0; y < 3; ++y) {
        for (int x = 0; x < 512; ++x) {
            for (int c = 0; c < 3; ++c) {
                const int sum = src.at(2 * x, 2 * y)[c] + src.at(2 * x + 1, 2 * y)[c] + src.at(2 * x, 2 * y + 1)[c] +
                                src.at(2 * x + 1, 2 * y + 1)[c];
                const int want = static_cast<int>(std::floor(sum / 4.0 + 0.5));
                REQUIRE(out.at(x, y)[c] == want);
            }
        }
    }
    const Raster small = testing::pattern_raster(40, 30, 2);
    CHECK(resize_to_target(small) == small);
}

TEST_CASE("jpeg encoding quality, framing and determinism") {
    const Raster src = testing::pattern_raster(512, 512, 77);
    const Bytes a = encode_jpeg(src);
    const Bytes b = encode_jpeg(src);
    CHECK(a == b);
    REQUIRE(a.size() > 4);
    CHECK(a[0] == 0xFF);
    CHECK(a[1] == 0xD8);
    CHECK(a[a.size() - 2] == 0xFF);
    CHECK(a[a.size() - 1] == 0xD9);
    CHECK(has_marker(a, 0xC0));  // baseline SOF
    CHECK_FALSE(has_marker(a, 0xC2));
    const Raster back = decode_jpeg(a);
    CHECK(back.width == 512);
    CHECK(back.height == 512);
    const double q = testing::psnr(src, back);
    MESSAGE("PSNR at q=90: " << q << " dB");
    CHECK(q >= 30.0);
    CHECK(encode_jpeg(src, 50).size() < a.size());
}

TEST_CASE("codec description records the encoder settings") {
    CHECK(codec_description() == "libjpeg-turbo 2.1.2 baseline q=90 dct=islow subsampling=4:2:0 resample=area");
    CHECK(codec_description(75).find("q=75") != std::string::npos);
}
