#include "floodlens/imaging.hpp"

#include "floodlens/error.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

namespace floodlens {

namespace {

enum class Container { Png, Jpeg, Other };

Container sniff(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::array<unsigned char, 8> head{};
    in.read(reinterpret_cast<char*>(head.data()), head.size());
    const auto got = in.gcount();
    static constexpr std::array<unsigned char, 8> png{0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (got == 8 && std::equal(png.begin(), png.end(), head.begin())) return Container::Png;
    if (got >= 3 && head[0] == 0xFF && head[1] == 0xD8 && head[2] == 0xFF) return Container::Jpeg;
    return Container::Other;
}

cv::Mat decode(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw Error(ErrorCode::FileNotFound, path.string());
    }
    if (sniff(path) == Container::Other) {
        throw Error(ErrorCode::DecodeError, "not a PNG or JPEG file: " + path.string());
    }
    cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (raw.empty()) {
        throw Error(ErrorCode::DecodeError, "cannot decode " + path.string());
    }
    if (raw.depth() == CV_16U) {
        cv::Mat eight;
        raw.convertTo(eight, CV_8U, 255.0 / 65535.0);
        raw = eight;
    } else if (raw.depth() != CV_8U) {
        throw Error(ErrorCode::DecodeError, "unsupported sample depth in " + path.string());
    }
    return raw;
}

// sRGB transfer function, tabulated for every 8-bit code.
const std::array<double, 256>& linear_table() {
    static const std::array<double, 256> table = [] {
        std::array<double, 256> t{};
        for (int i = 0; i < 256; ++i) {
            const double c = i / 255.0;
            t[i] = c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
        }
        return t;
    }();
    return table;
}

double lab_f(double t) noexcept {
    constexpr double epsilon = 216.0 / 24389.0;
    constexpr double kappa = 24389.0 / 27.0;
    return t > epsilon ? std::cbrt(t) : (kappa * t + 16.0) / 116.0;
}

template <typename Image>
void check_margin(const Image& img, int margin) {
    if (margin < 0 || img.width <= 2 * margin || img.height <= 2 * margin) {
        throw Error(ErrorCode::ImageTooSmall, "cannot crop a " + std::to_string(img.width) + "x" +
                                                  std::to_string(img.height) + " image by " +
                                                  std::to_string(margin));
    }
}

template <typename T>
std::vector<T> crop_plane(const std::vector<T>& src, int width, int height, int channels, int margin) {
    const int w = width - 2 * margin;
    const int h = height - 2 * margin;
    std::vector<T> out;
    out.reserve(static_cast<std::size_t>(w) * h * channels);
    for (int y = margin; y < height - margin; ++y) {
        const auto row = src.begin() + (static_cast<std::ptrdiff_t>(y) * width + margin) * channels;
        out.insert(out.end(), row, row + static_cast<std::ptrdiff_t>(w) * channels);
    }
    return out;
}

}  // namespace

RgbImage::RgbImage(int w, int h, std::vector<std::uint8_t> d) : width(w), height(h), data(std::move(d)) {
    if (w < 0 || h < 0 || data.size() != static_cast<std::size_t>(w) * h * 3) {
        throw Error(ErrorCode::DimensionMismatch, "RGB buffer does not match " + std::to_string(w) + "x" +
                                                      std::to_string(h));
    }
}

RgbImage RgbImage::filled(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    std::vector<std::uint8_t> d(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < d.size(); i += 3) {
        d[i] = r;
        d[i + 1] = g;
        d[i + 2] = b;
    }
    return RgbImage(w, h, std::move(d));
}

GrayImage::GrayImage(int w, int h, std::vector<std::uint8_t> d) : width(w), height(h), data(std::move(d)) {
    if (w < 0 || h < 0 || data.size() != static_cast<std::size_t>(w) * h) {
        throw Error(ErrorCode::DimensionMismatch, "gray buffer does not match " + std::to_string(w) + "x" +
                                                      std::to_string(h));
    }
}

RgbImage load_image(const std::filesystem::path& path) {
    cv::Mat raw = decode(path);
    if (raw.cols < kMinImageEdge || raw.rows < kMinImageEdge) {
        throw Error(ErrorCode::ImageTooSmall, path.string() + " is " + std::to_string(raw.cols) + "x" +
                                                  std::to_string(raw.rows));
    }
    RgbImage out;
    out.width = raw.cols;
    out.height = raw.rows;
    out.data.resize(out.pixel_count() * 3);
    const int channels = raw.channels();
    for (int y = 0; y < raw.rows; ++y) {
        const std::uint8_t* src = raw.ptr<std::uint8_t>(y);
        for (int x = 0; x < raw.cols; ++x) {
            std::uint8_t* dst = out.pixel(x, y);
            const std::uint8_t* p = src + static_cast<std::ptrdiff_t>(x) * channels;
            if (channels == 1 || channels == 2) {
                dst[0] = dst[1] = dst[2] = p[0];
            } else {
                // OpenCV stores BGR(A).
                dst[0] = p[2];
                dst[1] = p[1];
                dst[2] = p[0];
            }
        }
    }
    return out;
}

GrayImage load_mask(const std::filesystem::path& path) {
    cv::Mat raw = decode(path);
    GrayImage out;
    out.width = raw.cols;
    out.height = raw.rows;
    out.data.resize(out.pixel_count());
    const int channels = raw.channels();
    for (int y = 0; y < raw.rows; ++y) {
        const std::uint8_t* src = raw.ptr<std::uint8_t>(y);
        for (int x = 0; x < raw.cols; ++x) {
            // First stored channel is blue for color files; class-id masks replicate the id.
            out.data[static_cast<std::size_t>(y) * raw.cols + x] = src[static_cast<std::ptrdiff_t>(x) * channels];
        }
    }
    return out;
}

void save_gray_png(const std::filesystem::path& path, const GrayImage& img) {
    cv::Mat m(img.height, img.width, CV_8UC1, const_cast<std::uint8_t*>(img.data.data()));
    if (!cv::imwrite(path.string(), m, {cv::IMWRITE_PNG_COMPRESSION, 6})) {
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    }
}

void save_rgb_png(const std::filesystem::path& path, const RgbImage& img) {
    cv::Mat m(img.height, img.width, CV_8UC3);
    for (int y = 0; y < img.height; ++y) {
        auto* dst = m.ptr<std::uint8_t>(y);
        for (int x = 0; x < img.width; ++x) {
            const std::uint8_t* p = img.pixel(x, y);
            dst[3 * x] = p[2];
            dst[3 * x + 1] = p[1];
            dst[3 * x + 2] = p[0];
        }
    }
    if (!cv::imwrite(path.string(), m, {cv::IMWRITE_PNG_COMPRESSION, 6})) {
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    }
}

void srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b, double out[3]) noexcept {
    const auto& lin = linear_table();
    const double rl = lin[r];
    const double gl = lin[g];
    const double bl = lin[b];
    // sRGB -> XYZ (D65); the white point is the row sum so (255,255,255) lands exactly on it.
    constexpr double m[3][3] = {{0.4124564, 0.3575761, 0.1804375},
                                {0.2126729, 0.7151522, 0.0721750},
                                {0.0193339, 0.1191920, 0.9503041}};
    constexpr double xn = m[0][0] + m[0][1] + m[0][2];
    constexpr double yn = m[1][0] + m[1][1] + m[1][2];
    constexpr double zn = m[2][0] + m[2][1] + m[2][2];
    const double x = (m[0][0] * rl + m[0][1] * gl + m[0][2] * bl) / xn;
    const double y = (m[1][0] * rl + m[1][1] * gl + m[1][2] * bl) / yn;
    const double z = (m[2][0] * rl + m[2][1] * gl + m[2][2] * bl) / zn;
    const double fx = lab_f(x);
    const double fy = lab_f(y);
    const double fz = lab_f(z);
    out[0] = std::clamp(116.0 * fy - 16.0, 0.0, 100.0);
    out[1] = std::clamp(500.0 * (fx - fy), -128.0, 127.0);
    out[2] = std::clamp(200.0 * (fy - fz), -128.0, 127.0);
}

LabImage rgb_to_lab(const RgbImage& img) {
    LabImage out;
    out.width = img.width;
    out.height = img.height;
    out.data.resize(img.pixel_count() * 3);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        srgb_to_lab(img.data[3 * i], img.data[3 * i + 1], img.data[3 * i + 2], &out.data[3 * i]);
    }
    return out;
}

GrayImage rgb_to_gray(const RgbImage& img) {
    GrayImage out;
    out.width = img.width;
    out.height = img.height;
    out.data.resize(img.pixel_count());
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        // Integer weights out of 1000 keep the rounding exact.
        const unsigned luma = 299u * img.data[3 * i] + 587u * img.data[3 * i + 1] + 114u * img.data[3 * i + 2];
        out.data[i] = static_cast<std::uint8_t>(std::min(255u, (luma + 500u) / 1000u));
    }
    return out;
}

LabImage crop(const LabImage& img, int margin) {
    check_margin(img, margin);
    LabImage out;
    out.width = img.width - 2 * margin;
    out.height = img.height - 2 * margin;
    out.data = crop_plane(img.data, img.width, img.height, 3, margin);
    return out;
}

RgbImage crop(const RgbImage& img, int margin) {
    check_margin(img, margin);
    return RgbImage(img.width - 2 * margin, img.height - 2 * margin,
                    crop_plane(img.data, img.width, img.height, 3, margin));
}

GrayImage crop(const GrayImage& img, int margin) {
    check_margin(img, margin);
    return GrayImage(img.width - 2 * margin, img.height - 2 * margin,
                     crop_plane(img.data, img.width, img.height, 1, margin));
}

}  // namespace floodlens
