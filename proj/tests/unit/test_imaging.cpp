#include "floodlens/error.hpp"
#include "floodlens/imaging.hpp"
#include "floodlens/random.hpp"

#include <gtest/gtest.h>
#include <opencv2/imgcodecs.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace floodlens;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("floodlens_imaging_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::array<double, 3> lab_of(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    std::array<double, 3> out{};
    srgb_to_lab(r, g, b, out.data());
    return out;
}

}  // namespace

TEST(Imaging, RgbImageRejectsWrongBufferSize) {
    EXPECT_THROW(RgbImage(2, 2, std::vector<std::uint8_t>(11)), Error);
    EXPECT_THROW(GrayImage(2, 2, std::vector<std::uint8_t>(5)), Error);
}

TEST(Imaging, LoadTinyPngIsTooSmall) {
    const fs::path dir = temp_dir("tiny");
    save_rgb_png(dir / "one.png", RgbImage::filled(1, 1, 255, 0, 0));
    try {
        load_image(dir / "one.png");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ImageTooSmall);
    }
}

TEST(Imaging, LoadUniformPng) {
    const fs::path dir = temp_dir("uniform");
    save_rgb_png(dir / "u.png", RgbImage::filled(4, 4, 10, 20, 30));
    const RgbImage img = load_image(dir / "u.png");
    ASSERT_EQ(img.width, 4);
    ASSERT_EQ(img.height, 4);
    for (int i = 0; i < 16; ++i) {
        EXPECT_EQ(img.data[i * 3], 10);
        EXPECT_EQ(img.data[i * 3 + 1], 20);
        EXPECT_EQ(img.data[i * 3 + 2], 30);
    }
}

TEST(Imaging, LoadMissingAndCorrupt) {
    const fs::path dir = temp_dir("bad");
    try {
        load_image(dir / "absent.png");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::FileNotFound);
    }
    std::ofstream(dir / "junk.png") << "not an image at all";
    try {
        load_image(dir / "junk.png");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DecodeError);
    }
}

TEST(Imaging, AlphaDroppedAnd16BitRescaled) {
    const fs::path dir = temp_dir("depth");
    // OpenCV stores BGR(A).
    cv::Mat rgba(3, 3, CV_8UC4, cv::Scalar(30, 20, 10, 7));
    cv::imwrite((dir / "a.png").string(), rgba);
    const RgbImage a = load_image(dir / "a.png");
    EXPECT_EQ(a.data[0], 10);
    EXPECT_EQ(a.data[1], 20);
    EXPECT_EQ(a.data[2], 30);

    cv::Mat deep(3, 3, CV_16UC3, cv::Scalar(65535, 32896, 0));
    cv::imwrite((dir / "d.png").string(), deep);
    const RgbImage d = load_image(dir / "d.png");
    EXPECT_EQ(d.data[0], 0);
    EXPECT_EQ(d.data[1], 128);
    EXPECT_EQ(d.data[2], 255);

    cv::Mat gray(3, 3, CV_8UC1, cv::Scalar(77));
    cv::imwrite((dir / "g.png").string(), gray);
    const RgbImage g = load_image(dir / "g.png");
    EXPECT_EQ(g.data[0], 77);
    EXPECT_EQ(g.data[2], 77);
}

TEST(Imaging, JpegRoundTripWithinCodecTolerance) {
    const fs::path dir = temp_dir("jpeg");
    // Smooth 8x8 pattern encoded by the reference codec at high quality.
    cv::Mat src(8, 8, CV_8UC3);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) src.at<cv::Vec3b>(y, x) = cv::Vec3b(100 + 4 * x, 120 + 3 * y, 90 + 2 * (x + y));
    }
    cv::imwrite((dir / "p.jpg").string(), src, {cv::IMWRITE_JPEG_QUALITY, 100});
    const RgbImage img = load_image(dir / "p.jpg");
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
            const cv::Vec3b s = src.at<cv::Vec3b>(y, x);
            const std::uint8_t* p = img.pixel(x, y);
            EXPECT_NEAR(p[0], s[2], 4);
            EXPECT_NEAR(p[1], s[1], 4);
            EXPECT_NEAR(p[2], s[0], 4);
        }
    }
}

TEST(Imaging, LabReferencePoints) {
    const auto white = lab_of(255, 255, 255);
    EXPECT_NEAR(white[0], 100.0, 0.01);
    EXPECT_NEAR(white[1], 0.0, 0.01);
    EXPECT_NEAR(white[2], 0.0, 0.01);
    const auto black = lab_of(0, 0, 0);
    EXPECT_NEAR(black[0], 0.0, 0.01);
    EXPECT_NEAR(black[1], 0.0, 0.01);
    EXPECT_NEAR(black[2], 0.0, 0.01);
    // scikit-image rgb2lab: 50.0344 for gray 119.
    const auto mid = lab_of(119, 119, 119);
    EXPECT_NEAR(mid[0], 50.0344, 0.01);
    EXPECT_LT(std::abs(mid[1]), 0.5);
    EXPECT_LT(std::abs(mid[2]), 0.5);
}

TEST(Imaging, LabMatchesIndependentColorimetry) {
    // scikit-image rgb2lab values.
    const auto a = lab_of(100, 150, 200);
    EXPECT_NEAR(a[0], 60.5071, 0.1);
    EXPECT_NEAR(a[1], -2.7897, 0.1);
    EXPECT_NEAR(a[2], -30.9268, 0.1);
    const auto b = lab_of(200, 30, 60);
    EXPECT_NEAR(b[0], 43.5630, 0.1);
    EXPECT_NEAR(b[1], 64.0570, 0.1);
    EXPECT_NEAR(b[2], 28.4723, 0.1);
}

TEST(Imaging, LabLightnessMonotoneOnGrays) {
    double last = -1.0;
    for (int v = 0; v < 256; ++v) {
        const auto lab = lab_of(v, v, v);
        EXPECT_GE(lab[0], last);
        EXPECT_GE(lab[0], 0.0);
        EXPECT_LE(lab[0], 100.0 + 1e-9);
        last = lab[0];
    }
}

TEST(Imaging, RgbToLabPreservesShape) {
    const RgbImage img = RgbImage::filled(5, 4, 1, 2, 3);
    const LabImage lab = rgb_to_lab(img);
    EXPECT_EQ(lab.width, 5);
    EXPECT_EQ(lab.height, 4);
    EXPECT_EQ(lab.data.size(), 60u);
}

TEST(Imaging, GrayConversion) {
    EXPECT_EQ(rgb_to_gray(RgbImage::filled(3, 3, 255, 255, 255)).data[0], 255);
    EXPECT_EQ(rgb_to_gray(RgbImage::filled(3, 3, 0, 0, 0)).data[0], 0);
    EXPECT_EQ(rgb_to_gray(RgbImage::filled(3, 3, 100, 150, 200)).data[0], 141);
    for (int v = 0; v < 256; ++v) {
        const auto c = static_cast<std::uint8_t>(v);
        EXPECT_EQ(rgb_to_gray(RgbImage::filled(3, 3, c, c, c)).data[4], v);
    }
}

TEST(Imaging, GrayMatchesRoundedLuma) {
    Rng rng(5);
    for (int i = 0; i < 2000; ++i) {
        const auto r = static_cast<std::uint8_t>(rng.below(256));
        const auto g = static_cast<std::uint8_t>(rng.below(256));
        const auto b = static_cast<std::uint8_t>(rng.below(256));
        const double luma = 0.299 * r + 0.587 * g + 0.114 * b;
        const int expected = static_cast<int>(std::floor(luma + 0.5));
        EXPECT_EQ(rgb_to_gray(RgbImage::filled(3, 3, r, g, b)).data[0], expected);
    }
}

TEST(Imaging, CropDropsBorder) {
    std::vector<std::uint8_t> d(25);
    for (int i = 0; i < 25; ++i) d[i] = static_cast<std::uint8_t>(i);
    const GrayImage inner = crop(GrayImage(5, 5, d), 1);
    EXPECT_EQ(inner.width, 3);
    EXPECT_EQ(inner.at(0, 0), 6);
    EXPECT_EQ(inner.at(2, 2), 18);
}
