#include "scifig/image.hpp"

#include <stdlib.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>

#include <jpeglib.h>
#include <jerror.h>
#include <png.h>

#include "scifig/error.hpp"
#include "scifig/util/subprocess.hpp"

#define SCIFIG_STR2(x) #x
#define SCIFIG_STR(x) SCIFIG_STR2(x)

namespace scifig::image {

Raster::Raster(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

namespace {

// libjpeg reports through callbacks; errors and the premature-EOF warning
// unwind with longjmp back to the calling frame.
struct JpegErrorManager {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

void jpeg_emit_message(j_common_ptr cinfo, int level) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    if (level < 0 && cinfo->err->msg_code == JWRN_JPEG_EOF) {
        (*cinfo->err->format_message)(cinfo, err->message);
        std::longjmp(err->jump, 1);
    }
}

struct JpegDecodeState {
    Raster* out = nullptr;
    std::vector<std::uint8_t> row;
};

// Returns false with err.message set on failure. No objects with
// destructors live in this frame across setjmp.
bool jpeg_decode_into(ByteView bytes, JpegDecodeState& state, JpegErrorManager& err) {
    jpeg_decompress_struct cinfo;
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = jpeg_error_exit;
    err.pub.emit_message = jpeg_emit_message;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        return false;
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    const bool cmyk = cinfo.jpeg_color_space == JCS_CMYK || cinfo.jpeg_color_space == JCS_YCCK;
    cinfo.out_color_space = cmyk ? JCS_CMYK : JCS_RGB;
    cinfo.dct_method = JDCT_ISLOW;
    jpeg_start_decompress(&cinfo);
    const int w = static_cast<int>(cinfo.output_width);
    const int h = static_cast<int>(cinfo.output_height);
    *state.out = Raster(w, h);
    state.row.assign(static_cast<std::size_t>(w) * cinfo.output_components, 0);
    const bool inverted = cinfo.saw_Adobe_marker;
    while (cinfo.output_scanline < cinfo.output_height) {
        const int y = static_cast<int>(cinfo.output_scanline);
        JSAMPROW rows[1] = {cmyk ? state.row.data() : state.out->at(0, y)};
        jpeg_read_scanlines(&cinfo, rows, 1);
        if (!cmyk) continue;
        for (int x = 0; x < w; ++x) {
            const std::uint8_t* p = state.row.data() + static_cast<std::size_t>(x) * 4;
            std::uint8_t* q = state.out->at(x, y);
            for (int c = 0; c < 3; ++c) {
                const int ink = inverted ? p[c] : 255 - p[c];
                const int key = inverted ? p[3] : 255 - p[3];
                q[c] = static_cast<std::uint8_t>((ink * key + 127) / 255);
            }
        }
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return true;
}

struct JpegEncodeState {
    unsigned char* buffer = nullptr;
    unsigned long size = 0;
};

bool jpeg_encode_into(const Raster& img, int quality, JpegEncodeState& state, JpegErrorManager& err) {
    jpeg_compress_struct cinfo;
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
        jpeg_destroy_compress(&cinfo);
        return false;
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &state.buffer, &state.size);
    cinfo.image_width = static_cast<JDIMENSION>(img.width);
    cinfo.image_height = static_cast<JDIMENSION>(img.height);
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    cinfo.dct_method = JDCT_ISLOW;
    cinfo.optimize_coding = FALSE;
    cinfo.comp_info[0].h_samp_factor = 2;
    cinfo.comp_info[0].v_samp_factor = 2;
    for (int c = 1; c < 3; ++c) {
        cinfo.comp_info[c].h_samp_factor = 1;
        cinfo.comp_info[c].v_samp_factor = 1;
    }
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        JSAMPROW rows[1] = {const_cast<std::uint8_t*>(img.at(0, static_cast<int>(cinfo.next_scanline)))};
        jpeg_write_scanlines(&cinfo, rows, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    return true;
}

bool has_prefix(ByteView b, std::initializer_list<std::uint8_t> prefix) {
    if (b.size() < prefix.size()) return false;
    return std::equal(prefix.begin(), prefix.end(), b.begin());
}

enum class Sniffed { Jpeg, Png, Gif, Vector, Unknown };

Sniffed sniff(ByteView b) {
    if (has_prefix(b, {0xFF, 0xD8, 0xFF})) return Sniffed::Jpeg;
    if (has_prefix(b, {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A})) return Sniffed::Png;
    if (has_prefix(b, {'G', 'I', 'F', '8'})) return Sniffed::Gif;
    if (has_prefix(b, {'%', 'P', 'D', 'F'}) || has_prefix(b, {'%', '!'}) || has_prefix(b, {0xC5, 0xD0, 0xD3, 0xC6})) {
        return Sniffed::Vector;
    }
    return Sniffed::Unknown;
}

Raster decode_raster(ByteView bytes, Sniffed kind) {
    switch (kind) {
        case Sniffed::Jpeg: return decode_jpeg(bytes);
        case Sniffed::Png: return decode_png(bytes);
        case Sniffed::Gif: return decode_gif(bytes);
        default: throw Error(ErrorKind::Decode, "unrecognized image data");
    }
}

class TempDir {
public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "scifig-hook-XXXXXX").string();
        if (::mkdtemp(tmpl.data()) == nullptr) throw Error(ErrorKind::Io, "cannot create temporary directory");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

Raster rasterize_with_hook(ByteView bytes, ingest::ImageFormat format, const RasterizerHook& hook) {
    TempDir dir;
    const auto input = dir.path() / ("input." + std::string(ingest::extension_of(format)));
    const auto output = dir.path() / "output.png";
    write_file_atomic(input, bytes);
    const std::string cmd = expand_template(hook.command, {{"input", shell_quote(input.string())},
                                                           {"output", shell_quote(output.string())},
                                                           {"maxdim", std::to_string(hook.max_dim)}});
    const ProcessResult res = run_shell(cmd, hook.timeout, false);
    if (res.timed_out) throw Error(ErrorKind::Hook, "rasterizer timed out");
    if (res.exit_code != 0) throw Error(ErrorKind::Hook, "rasterizer exited with " + std::to_string(res.exit_code));
    if (!std::filesystem::exists(output)) throw Error(ErrorKind::Hook, "rasterizer produced no output");
    const Bytes produced = read_file(output);
    const Sniffed kind = sniff(produced);
    if (kind != Sniffed::Png && kind != Sniffed::Jpeg) {
        throw Error(ErrorKind::Hook, "rasterizer output is not PNG or JPEG");
    }
    try {
        return decode_raster(produced, kind);
    } catch (const Error& e) {
        throw Error(ErrorKind::Hook, std::string("rasterizer output undecodable: ") + e.what());
    }
}

// Source index ranges and weights for one axis of an area resample.
struct Tap {
    int first = 0;
    std::vector<double> weights;
};

std::vector<Tap> area_taps(int src, int dst) {
    std::vector<Tap> taps(static_cast<std::size_t>(dst));
    const double scale = static_cast<double>(src) / dst;
    for (int i = 0; i < dst; ++i) {
        const double lo = i * scale;
        const double hi = (i + 1) * scale;
        const int first = static_cast<int>(std::floor(lo));
        const int last = std::min(src - 1, static_cast<int>(std::ceil(hi)) - 1);
        Tap& t = taps[static_cast<std::size_t>(i)];
        t.first = first;
        for (int s = first; s <= last; ++s) {
            const double overlap = std::min(hi, s + 1.0) - std::max(lo, static_cast<double>(s));
            t.weights.push_back(overlap / scale);
        }
    }
    return taps;
}

}  // namespace

Raster decode_jpeg(ByteView bytes) {
    Raster out;
    JpegDecodeState state;
    state.out = &out;
    JpegErrorManager err{};
    if (!jpeg_decode_into(bytes, state, err)) {
        throw Error(ErrorKind::Decode, std::string("jpeg: ") + err.message);
    }
    return out;
}

Raster decode_png(ByteView bytes) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        throw Error(ErrorKind::Decode, std::string("png: ") + image.message);
    }
    image.format = PNG_FORMAT_RGBA;
    std::vector<std::uint8_t> rgba(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, rgba.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw Error(ErrorKind::Decode, "png: " + msg);
    }
    Raster out(static_cast<int>(image.width), static_cast<int>(image.height));
    const std::size_t n = static_cast<std::size_t>(out.width) * out.height;
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t a = rgba[i * 4 + 3];
        for (int c = 0; c < 3; ++c) out.pixels[i * 3 + c] = composite_over_white(rgba[i * 4 + c], a);
    }
    return out;
}

Raster decode_image(ByteView bytes, ingest::ImageFormat format, const std::optional<RasterizerHook>& hook) {
    const Sniffed kind = sniff(bytes);
    if (kind == Sniffed::Jpeg || kind == Sniffed::Png || kind == Sniffed::Gif) return decode_raster(bytes, kind);
    if (ingest::is_vector_format(format) || kind == Sniffed::Vector) {
        if (!hook || hook->command.empty()) throw Error(ErrorKind::VectorNoHook, "no rasterizer configured");
        return rasterize_with_hook(bytes, format, *hook);
    }
    switch (format) {
        case ingest::ImageFormat::Jpg:
        case ingest::ImageFormat::Jpeg: return decode_jpeg(bytes);
        case ingest::ImageFormat::Png: return decode_png(bytes);
        case ingest::ImageFormat::Gif: return decode_gif(bytes);
        default: throw Error(ErrorKind::Decode, "unrecognized image data");
    }
}

Size target_size(int width, int height, int target) {
    if (std::max(width, height) <= target) return {width, height};
    const auto scaled = [target](long long minor, long long major) {
        return static_cast<int>(std::max(1LL, (2 * minor * target + major) / (2 * major)));
    };
    if (width >= height) return {target, scaled(height, width)};
    return {scaled(width, height), target};
}

Raster resize_to_target(const Raster& img, int target) {
    const Size size = target_size(img.width, img.height, target);
    if (size.width == img.width && size.height == img.height) return img;
    const auto xtaps = area_taps(img.width, size.width);
    const auto ytaps = area_taps(img.height, size.height);
    // Horizontal pass into doubles, then vertical.
    std::vector<double> mid(static_cast<std::size_t>(size.width) * img.height * 3, 0.0);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < size.width; ++x) {
            const Tap& t = xtaps[static_cast<std::size_t>(x)];
            double acc[3] = {0, 0, 0};
            for (std::size_t k = 0; k < t.weights.size(); ++k) {
                const std::uint8_t* p = img.at(t.first + static_cast<int>(k), y);
                for (int c = 0; c < 3; ++c) acc[c] += t.weights[k] * p[c];
            }
            double* m = mid.data() + (static_cast<std::size_t>(y) * size.width + x) * 3;
            for (int c = 0; c < 3; ++c) m[c] = acc[c];
        }
    }
    Raster out(size.width, size.height);
    for (int y = 0; y < size.height; ++y) {
        const Tap& t = ytaps[static_cast<std::size_t>(y)];
        for (int x = 0; x < size.width; ++x) {
            double acc[3] = {0, 0, 0};
            for (std::size_t k = 0; k < t.weights.size(); ++k) {
                const double* m =
                    mid.data() + (static_cast<std::size_t>(t.first + static_cast<int>(k)) * size.width + x) * 3;
                for (int c = 0; c < 3; ++c) acc[c] += t.weights[k] * m[c];
            }
            std::uint8_t* q = out.at(x, y);
            for (int c = 0; c < 3; ++c) q[c] = static_cast<std::uint8_t>(std::clamp(std::floor(acc[c] + 0.5), 0.0, 255.0));
        }
    }
    return out;
}

Bytes encode_jpeg(const Raster& img, int quality) {
    if (img.width < 1 || img.height < 1 || img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * 3) {
        throw Error(ErrorKind::Format, "invalid raster");
    }
    if (quality < 1 || quality > 100) throw Error(ErrorKind::Config, "jpeg quality must be in 1..100");
    JpegEncodeState state;
    JpegErrorManager err{};
    const bool ok = jpeg_encode_into(img, quality, state, err);
    Bytes out;
    if (ok) out.assign(state.buffer, state.buffer + state.size);
    std::free(state.buffer);
    if (!ok) throw Error(ErrorKind::Format, std::string("jpeg encode: ") + err.message);
    return out;
}

std::string codec_description(int quality) {
    return "libjpeg-turbo " SCIFIG_STR(LIBJPEG_TURBO_VERSION) " baseline q=" + std::to_string(quality) +
           " dct=islow subsampling=4:2:0 resample=area";
}

}  // namespace scifig::image
