#include "crackgen/image.hpp"

#include "crackgen/core.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>

namespace crackgen {

RgbImage::RgbImage(int width, int height, Rgb fill) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw Error("negative image dimensions");
    data_.resize(static_cast<std::size_t>(width) * height * 3);
    for (std::size_t i = 0; i < data_.size(); i += 3) {
        data_[i] = fill.r;
        data_[i + 1] = fill.g;
        data_[i + 2] = fill.b;
    }
}

Texture Texture::solid(Rgb c, std::string name) {
    Texture t;
    t.color = c;
    t.source = name.empty() ? "solid:" + std::to_string(c.r) + "," + std::to_string(c.g) + "," +
                                  std::to_string(c.b)
                            : std::move(name);
    return t;
}

Texture Texture::from_png(const std::filesystem::path& path) {
    Texture t;
    t.source = path.string();
    t.image = std::make_shared<const RgbImage>(read_png_rgb(path));
    return t;
}

Rgb Texture::sample(double u, double v) const {
    if (!image || image->empty()) return color;
    const int w = image->width();
    const int h = image->height();
    double fu = u - std::floor(u);
    double fv = v - std::floor(v);
    int x = static_cast<int>(fu * w);
    int y = static_cast<int>((1.0 - fv) * h);
    x = x < 0 ? 0 : (x >= w ? w - 1 : x);
    y = y < 0 ? 0 : (y >= h ? h - 1 : y);
    return image->at(x, y);
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) {
        throw Error(std::string("cannot open '") + path.string() + "' for " +
                    (mode[0] == 'r' ? "reading" : "writing"));
    }
    return f;
}

[[noreturn]] void png_fail(png_structp, png_const_charp msg) {
    throw Error(std::string("libpng: ") + msg);
}

void png_warn(png_structp, png_const_charp) {}

// Writes rows of `bit_depth`/`color_type`; rows are already in PNG byte order.
void write_png_rows(const std::filesystem::path& path, int width, int height, int bit_depth,
                    int color_type, const std::vector<std::uint8_t>& rows, std::size_t stride) {
    FilePtr f = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw Error("libpng: out of memory");
    }
    try {
        png_init_io(png, f.get());
        png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
                     PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_set_compression_level(png, 6);
        png_write_info(png, info);
        for (int y = 0; y < height; ++y) {
            png_write_row(png, rows.data() + static_cast<std::size_t>(y) * stride);
        }
        png_write_end(png, nullptr);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
    png_destroy_write_struct(&png, &info);
    if (std::fflush(f.get()) != 0) throw Error("write failed: " + path.string());
}

struct DecodedPng {
    int width = 0;
    int height = 0;
    int channels = 0;
    int bit_depth = 0;
    std::vector<std::uint8_t> rows;
};

// Decodes to 8-bit gray/RGB(A) unless keep16 is set, in which case 16-bit
// samples are kept big-endian.
DecodedPng decode_png(const std::filesystem::path& path, bool keep16) {
    FilePtr f = open_file(path, "rb");
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw Error("not a PNG file: " + path.string());
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("libpng: out of memory");
    }
    DecodedPng out;
    try {
        png_init_io(png, f.get());
        png_set_sig_bytes(png, 8);
        png_read_info(png, info);
        const int color_type = png_get_color_type(png, info);
        const int depth = png_get_bit_depth(png, info);
        if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
        if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
        if (depth == 16 && !keep16) png_set_strip_16(png);
        png_read_update_info(png, info);
        out.width = static_cast<int>(png_get_image_width(png, info));
        out.height = static_cast<int>(png_get_image_height(png, info));
        out.channels = png_get_channels(png, info);
        out.bit_depth = png_get_bit_depth(png, info);
        const std::size_t stride = png_get_rowbytes(png, info);
        out.rows.resize(stride * out.height);
        std::vector<png_bytep> ptrs(out.height);
        for (int y = 0; y < out.height; ++y) ptrs[y] = out.rows.data() + stride * y;
        png_read_image(png, ptrs.data());
        png_read_end(png, nullptr);
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

}  // namespace

void write_png(const std::filesystem::path& path, const RgbImage& image) {
    if (image.empty()) throw Error("cannot write empty image: " + path.string());
    write_png_rows(path, image.width(), image.height(), 8, PNG_COLOR_TYPE_RGB, image.bytes(),
                   static_cast<std::size_t>(image.width()) * 3);
}

RgbImage read_png_rgb(const std::filesystem::path& path) {
    DecodedPng d = decode_png(path, false);
    RgbImage img(d.width, d.height);
    const std::size_t stride = static_cast<std::size_t>(d.width) * d.channels;
    for (int y = 0; y < d.height; ++y) {
        for (int x = 0; x < d.width; ++x) {
            const std::uint8_t* p = d.rows.data() + y * stride + static_cast<std::size_t>(x) * d.channels;
            if (d.channels >= 3) {
                img.set(x, y, {p[0], p[1], p[2]});
            } else {
                img.set(x, y, {p[0], p[0], p[0]});
            }
        }
    }
    return img;
}

void write_png_ids(const std::filesystem::path& path, const IdBuffer& ids) {
    if (ids.width <= 0 || ids.height <= 0) throw Error("cannot write empty id buffer: " + path.string());
    std::vector<std::uint8_t> rows(ids.ids.size() * 2);
    for (std::size_t i = 0; i < ids.ids.size(); ++i) {
        if (ids.ids[i] > 0xffff) throw Error("crack id exceeds 16-bit range in " + path.string());
        rows[2 * i] = static_cast<std::uint8_t>(ids.ids[i] >> 8);
        rows[2 * i + 1] = static_cast<std::uint8_t>(ids.ids[i] & 0xff);
    }
    write_png_rows(path, ids.width, ids.height, 16, PNG_COLOR_TYPE_GRAY, rows,
                   static_cast<std::size_t>(ids.width) * 2);
}

IdBuffer read_png_ids(const std::filesystem::path& path) {
    DecodedPng d = decode_png(path, true);
    if (d.channels != 1) throw Error("id buffer must be single-channel: " + path.string());
    IdBuffer out(d.width, d.height);
    const int bytes = d.bit_depth == 16 ? 2 : 1;
    for (std::size_t i = 0; i < out.ids.size(); ++i) {
        out.ids[i] = bytes == 2 ? (std::uint32_t{d.rows[2 * i]} << 8) | d.rows[2 * i + 1] : d.rows[i];
    }
    return out;
}

}  // namespace crackgen
