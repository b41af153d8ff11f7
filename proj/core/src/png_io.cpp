#include "gendd/png_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

#include <png.h>

namespace gendd {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace

void write_png16(const std::string& path, const PngImage& img) {
    if (img.channels != 1 && img.channels != 3)
        throw std::invalid_argument("write_png16: channels must be 1 or 3");
    if (img.pixels.size() != img.width * img.height * img.channels)
        throw std::invalid_argument("write_png16: pixel buffer size mismatch");

    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("write_png16: cannot open '" + path + "' for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("write_png16: png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("write_png16: png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("write_png16: libpng error while writing '" + path + "'");
    }

    png_init_io(png, fp.get());
    int color = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 16, color, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_byte> row(img.width * img.channels * 2);
    for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t i = 0; i < img.width * img.channels; ++i) {
            double v = img.pixels[y * img.width * img.channels + i];
            v = std::min(1.0, std::max(0.0, v));
            auto q = static_cast<unsigned>(std::lround(v * 65535.0));
            row[2 * i] = static_cast<png_byte>(q >> 8);      // network byte order
            row[2 * i + 1] = static_cast<png_byte>(q & 0xff);
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

PngImage read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("read_png: cannot open '" + path + "'");

    png_byte header[8];
    if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8) != 0)
        throw std::runtime_error("read_png: '" + path + "' is not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("read_png: png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("read_png: png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_png: libpng error while reading '" + path + "'");
    }

    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int depth = png_get_bit_depth(png, info);
    int color = png_get_color_type(png, info);

    // normalize everything to 8- or 16-bit gray/RGB without alpha
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    depth = png_get_bit_depth(png, info);
    color = png_get_color_type(png, info);
    std::size_t channels = (color == PNG_COLOR_TYPE_GRAY) ? 1 : 3;
    if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_RGB) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_png: unsupported color type in '" + path + "'");
    }

    std::size_t row_bytes = png_get_rowbytes(png, info);
    std::vector<png_byte> raw(row_bytes * h);
    std::vector<png_bytep> rows(h);
    for (std::size_t y = 0; y < h; ++y) rows[y] = raw.data() + y * row_bytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    PngImage out;
    out.width = w;
    out.height = h;
    out.channels = channels;
    out.pixels.resize(static_cast<std::size_t>(w) * h * channels);
    if (depth == 16) {
        for (std::size_t i = 0; i < out.pixels.size(); ++i) {
            unsigned q = (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
            out.pixels[i] = q / 65535.0;
        }
    } else {
        for (std::size_t i = 0; i < out.pixels.size(); ++i) {
            unsigned q = raw[i];
            out.pixels[i] = (q * 257u) / 65535.0; // 8-bit promoted onto the 16-bit grid
        }
    }
    return out;
}

} // namespace gendd
