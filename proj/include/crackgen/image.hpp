#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace crackgen {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Row-major 8-bit RGB image.
class RgbImage {
public:
    RgbImage() = default;
    RgbImage(int width, int height, Rgb fill = {});

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool empty() const noexcept { return width_ == 0 || height_ == 0; }

    Rgb at(int x, int y) const {
        const std::size_t i = index(x, y);
        return {data_[i], data_[i + 1], data_[i + 2]};
    }
    void set(int x, int y, Rgb c) {
        const std::size_t i = index(x, y);
        data_[i] = c.r;
        data_[i + 1] = c.g;
        data_[i + 2] = c.b;
    }

    const std::vector<std::uint8_t>& bytes() const noexcept { return data_; }
    std::vector<std::uint8_t>& bytes() noexcept { return data_; }

    friend bool operator==(const RgbImage&, const RgbImage&) = default;

private:
    std::size_t index(int x, int y) const noexcept {
        return (static_cast<std::size_t>(y) * width_ + x) * 3;
    }
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> data_;
};

/// Per-pixel crack ids, 0 = background.
struct IdBuffer {
    int width = 0;
    int height = 0;
    std::vector<std::uint32_t> ids;

    IdBuffer() = default;
    IdBuffer(int w, int h) : width(w), height(h), ids(static_cast<std::size_t>(w) * h, 0) {}

    std::uint32_t at(int x, int y) const { return ids[static_cast<std::size_t>(y) * width + x]; }
    std::uint32_t& at(int x, int y) { return ids[static_cast<std::size_t>(y) * width + x]; }

    friend bool operator==(const IdBuffer&, const IdBuffer&) = default;
};

/// Surface appearance: an image sampled by UV, or a solid color when no image
/// is attached.
struct Texture {
    std::string source;  // file path or a descriptive name for solid colors
    std::shared_ptr<const RgbImage> image;
    Rgb color{200, 200, 200};

    static Texture solid(Rgb c, std::string name = {});
    /// Throws Error when the file cannot be read.
    static Texture from_png(const std::filesystem::path& path);

    /// Nearest-texel lookup with wrap-around addressing; v = 0 is the bottom row.
    Rgb sample(double u, double v) const;

    bool same_as(const Texture& other) const {
        return source == other.source && color == other.color && image == other.image;
    }
};

// PNG I/O. Writers emit no timestamp chunks, so identical pixels give
// identical bytes.
void write_png(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_png_rgb(const std::filesystem::path& path);
/// 16-bit grayscale; throws Error if any id exceeds 65535.
void write_png_ids(const std::filesystem::path& path, const IdBuffer& ids);
IdBuffer read_png_ids(const std::filesystem::path& path);

}  // namespace crackgen
