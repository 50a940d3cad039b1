#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace floodlens {

/// Interleaved 8-bit RGB, row-major.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    RgbImage() = default;
    /// Throws DimensionMismatch when data.size() != width * height * 3.
    RgbImage(int width, int height, std::vector<std::uint8_t> data);
    /// Uniformly filled image.
    static RgbImage filled(int width, int height, std::uint8_t r, std::uint8_t g, std::uint8_t b);

    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width) * height; }
    const std::uint8_t* pixel(int x, int y) const noexcept { return &data[(static_cast<std::size_t>(y) * width + x) * 3]; }
    std::uint8_t* pixel(int x, int y) noexcept { return &data[(static_cast<std::size_t>(y) * width + x) * 3]; }
};

/// CIELAB triples: L in [0,100], a and b in [-128,127].
struct LabImage {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width) * height; }
    const double* pixel(int x, int y) const noexcept { return &data[(static_cast<std::size_t>(y) * width + x) * 3]; }
};

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    GrayImage() = default;
    /// Throws DimensionMismatch when data.size() != width * height.
    GrayImage(int width, int height, std::vector<std::uint8_t> data);

    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width) * height; }
    std::uint8_t at(int x, int y) const noexcept { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// Smallest edge accepted by load_image; the texture pipeline needs a one pixel border.
inline constexpr int kMinImageEdge = 3;

/// Decodes a PNG or JPEG file. Alpha is dropped, gray is expanded to three
/// channels and 16-bit samples are rescaled to 8 bits.
/// Throws FileNotFound, DecodeError or ImageTooSmall.
RgbImage load_image(const std::filesystem::path& path);

/// Decodes a single-channel class-id mask (PNG). Multi-channel files use the first channel.
GrayImage load_mask(const std::filesystem::path& path);

/// Writes an 8-bit single-channel PNG.
void save_gray_png(const std::filesystem::path& path, const GrayImage& img);
/// Writes an 8-bit RGB PNG.
void save_rgb_png(const std::filesystem::path& path, const RgbImage& img);

/// sRGB (D65) to CIELAB.
LabImage rgb_to_lab(const RgbImage& img);

/// BT.601 luma, rounded half up.
GrayImage rgb_to_gray(const RgbImage& img);

/// Converts a single sRGB triple; exposed for tests and tools.
void srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b, double out[3]) noexcept;

/// Drops a border of `margin` pixels on every side.
LabImage crop(const LabImage& img, int margin);
RgbImage crop(const RgbImage& img, int margin);
GrayImage crop(const GrayImage& img, int margin);

}  // namespace floodlens
