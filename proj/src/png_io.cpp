#include "derm/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "derm/error.hpp"

namespace derm {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
    }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, &info);
    }
};

// Decodes into 8- or 16-bit samples with the requested channel count.
// want_channels: 1 (gray) or 3 (rgb). Bit depth is taken from the file.
struct Decoded {
    int width = 0;
    int height = 0;
    int channels = 0;
    int bit_depth = 0;           // 8 or 16
    std::vector<std::uint16_t> samples;  // row-major, 16-bit holds both depths
};

Decoded decode_png(const std::string& path, int want_channels) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw Error("cannot open PNG: " + path);
    PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!r.png) throw Error("libpng init failed");
    r.info = png_create_info_struct(r.png);
    if (!r.info) throw Error("libpng init failed");
    if (setjmp(png_jmpbuf(r.png))) throw Error("failed to decode PNG: " + path);
    png_init_io(r.png, f.get());
    png_read_info(r.png, r.info);

    png_uint_32 w = 0, h = 0;
    int bit_depth = 0, color_type = 0;
    png_get_IHDR(r.png, r.info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
    if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
    png_set_strip_alpha(r.png);
    if (want_channels == 3 &&
        (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA))
        png_set_gray_to_rgb(r.png);
    if (want_channels == 1 &&
        (color_type == PNG_COLOR_TYPE_RGB || color_type == PNG_COLOR_TYPE_RGB_ALPHA ||
         color_type == PNG_COLOR_TYPE_PALETTE))
        png_set_rgb_to_gray_fixed(r.png, 1, -1, -1);
    png_set_swap(r.png);  // 16-bit samples arrive big-endian; host is little-endian
    png_read_update_info(r.png, r.info);

    bit_depth = png_get_bit_depth(r.png, r.info);
    const int channels = png_get_channels(r.png, r.info);
    if (channels != want_channels)
        throw Error("unexpected channel count in PNG: " + path);

    Decoded d;
    d.width = static_cast<int>(w);
    d.height = static_cast<int>(h);
    d.channels = channels;
    d.bit_depth = bit_depth;
    d.samples.resize(static_cast<std::size_t>(w) * h * channels);

    const std::size_t rowbytes = png_get_rowbytes(r.png, r.info);
    std::vector<std::uint8_t> row(rowbytes);
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(r.png, row.data(), nullptr);
        std::uint16_t* dst = d.samples.data() + static_cast<std::size_t>(y) * w * channels;
        if (bit_depth == 16) {
            const std::uint16_t* src = reinterpret_cast<const std::uint16_t*>(row.data());
            for (std::size_t i = 0; i < static_cast<std::size_t>(w) * channels; ++i) dst[i] = src[i];
        } else {
            for (std::size_t i = 0; i < static_cast<std::size_t>(w) * channels; ++i) dst[i] = row[i];
        }
    }
    png_read_end(r.png, nullptr);
    return d;
}

void encode_png(const std::string& path, int width, int height, int channels, int bit_depth,
                const std::vector<std::uint16_t>& samples) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw Error("cannot write PNG: " + path);
    PngWriter wr;
    wr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!wr.png) throw Error("libpng init failed");
    wr.info = png_create_info_struct(wr.png);
    if (!wr.info) throw Error("libpng init failed");
    if (setjmp(png_jmpbuf(wr.png))) throw Error("failed to encode PNG: " + path);
    png_init_io(wr.png, f.get());
    const int color_type = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(wr.png, wr.info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(wr.png, wr.info);
    if (bit_depth == 16) png_set_swap(wr.png);

    std::vector<std::uint8_t> row(static_cast<std::size_t>(width) * channels *
                                  (bit_depth == 16 ? 2 : 1));
    for (int y = 0; y < height; ++y) {
        const std::uint16_t* src = samples.data() + static_cast<std::size_t>(y) * width * channels;
        if (bit_depth == 16) {
            std::uint16_t* dst = reinterpret_cast<std::uint16_t*>(row.data());
            for (std::size_t i = 0; i < static_cast<std::size_t>(width) * channels; ++i)
                dst[i] = src[i];
        } else {
            for (std::size_t i = 0; i < static_cast<std::size_t>(width) * channels; ++i)
                row[i] = static_cast<std::uint8_t>(src[i]);
        }
        png_write_row(wr.png, row.data());
    }
    png_write_end(wr.png, nullptr);
}

}  // namespace

void write_mask_png(const std::string& path, const BinaryMask& m) {
    std::vector<std::uint16_t> s(m.data.size());
    for (std::size_t i = 0; i < m.data.size(); ++i) s[i] = m.data[i] ? 255 : 0;
    encode_png(path, m.width, m.height, 1, 8, s);
}

BinaryMask read_mask_png(const std::string& path) {
    Decoded d = decode_png(path, 1);
    BinaryMask m(d.width, d.height);
    const int max = d.bit_depth == 16 ? 65535 : 255;
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = d.samples[i] * 2 >= max ? 1 : 0;
    return m;
}

void write_prob_png(const std::string& path, const ProbMask& m) {
    std::vector<std::uint16_t> s(m.data.size());
    for (std::size_t i = 0; i < m.data.size(); ++i)
        s[i] = static_cast<std::uint16_t>(std::lround(std::fmin(std::fmax(m.data[i], 0.f), 1.f) * 65535.f));
    encode_png(path, m.width, m.height, 1, 16, s);
}

ProbMask read_prob_png(const std::string& path) {
    Decoded d = decode_png(path, 1);
    ProbMask m(d.width, d.height);
    const float scale = d.bit_depth == 16 ? 65535.f : 255.f;
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = d.samples[i] / scale;
    return m;
}

void write_image_png(const std::string& path, const RasterImage& img) {
    std::vector<std::uint16_t> s(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i)
        s[i] = static_cast<std::uint16_t>(
            std::lround(std::fmin(std::fmax(img.data[i], 0.f), 1.f) * 255.f));
    encode_png(path, img.width, img.height, 3, 8, s);
}

RasterImage read_image_png(const std::string& path) {
    Decoded d = decode_png(path, 3);
    RasterImage img(d.width, d.height);
    const float scale = d.bit_depth == 16 ? 65535.f : 255.f;
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = d.samples[i] / scale;
    return img;
}

void read_png_size(const std::string& path, int& width, int& height) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw Error("cannot open PNG: " + path);
    PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    r.info = png_create_info_struct(r.png);
    if (!r.png || !r.info) throw Error("libpng init failed");
    if (setjmp(png_jmpbuf(r.png))) throw Error("failed to read PNG header: " + path);
    png_init_io(r.png, f.get());
    png_read_info(r.png, r.info);
    width = static_cast<int>(png_get_image_width(r.png, r.info));
    height = static_cast<int>(png_get_image_height(r.png, r.info));
}

}  // namespace derm
