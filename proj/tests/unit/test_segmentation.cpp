#include "floodlens/error.hpp"
#include "floodlens/segmentation.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

using namespace floodlens;
namespace fs = std::filesystem;

namespace {

ReferenceSignature flat_reference() {
    LbpHistogram h;
    h.bins.assign(256, 0.0);
    h.bins[255] = 1.0;
    h.normalized = true;
    return {{h}, "flat"};
}

// 22x22 image: the first `band` interior columns are flat dark blue, the rest
// is bright yellow noise. The blue band is darker than every neighbour, so its
// LBP codes are all 255 and it matches flat_reference() exactly.
RgbImage banded(int band, std::uint64_t seed) {
    Rng rng(seed);
    RgbImage img = RgbImage::filled(22, 22, 0, 0, 0);
    for (int y = 0; y < 22; ++y) {
        for (int x = 0; x < 22; ++x) {
            std::uint8_t* p = img.pixel(x, y);
            if (x <= band) {
                p[0] = 0;
                p[1] = 0;
                p[2] = 160;
            } else {
                p[0] = static_cast<std::uint8_t>(215 + rng.below(40));
                p[1] = static_cast<std::uint8_t>(215 + rng.below(40));
                p[2] = static_cast<std::uint8_t>(rng.below(40));
            }
        }
    }
    return img;
}

LbpMap map_of(std::vector<std::uint8_t> codes, int width) {
    LbpMap m;
    m.width = width;
    m.height = static_cast<int>(codes.size()) / width;
    m.codes = std::move(codes);
    return m;
}

BinaryMask full_mask(int w, int h) { return {w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, 1)}; }

}  // namespace

TEST(Segmentation, PixelFeaturesForWhite) {
    const RgbImage img = RgbImage::filled(3, 3, 255, 255, 255);
    const LbpMap lbp = lbp_map(rgb_to_gray(img), 1);
    const PixelFeatureMatrix f = build_pixel_features(crop(rgb_to_lab(img), 1), lbp, true);
    ASSERT_EQ(f.dim, 4);
    ASSERT_EQ(f.n, 1u);
    EXPECT_NEAR(f.rows[0], 1.0, 0.01);
    EXPECT_NEAR(f.rows[1], 0.502, 0.01);
    EXPECT_NEAR(f.rows[2], 0.502, 0.01);
    EXPECT_NEAR(f.rows[3], 1.0, 0.01);
    EXPECT_EQ(build_pixel_features(crop(rgb_to_lab(img), 1), lbp, false).dim, 3);
    EXPECT_EQ(build_pixel_features(crop(img, 1), lbp, false).dim, 3);
}

TEST(Segmentation, PixelFeaturesInUnitRange) {
    Rng rng(12);
    std::vector<std::uint8_t> data(20 * 17 * 3);
    for (auto& v : data) v = static_cast<std::uint8_t>(rng.below(256));
    const RgbImage img(20, 17, data);
    const LbpMap lbp = lbp_map(rgb_to_gray(img), 1);
    for (bool texture : {true, false}) {
        const PixelFeatureMatrix lab = build_pixel_features(crop(rgb_to_lab(img), 1), lbp, texture);
        const PixelFeatureMatrix rgb = build_pixel_features(crop(img, 1), lbp, texture);
        for (double v : lab.rows) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        for (double v : rgb.rows) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        EXPECT_EQ(lab.n, lbp.size());
    }
    EXPECT_THROW(build_pixel_features(rgb_to_lab(img), lbp, true), Error);
}

TEST(Segmentation, MatchPicksExactReference) {
    const LbpMap lbp = map_of({1, 1, 2, 2, 255, 255}, 3);
    const LabelMap labels{3, 2, 3, {0, 0, 1, 1, 2, 2}};
    const WaterMatch m = match_water_segment(labels, lbp, flat_reference());
    ASSERT_TRUE(m.segment.has_value());
    EXPECT_EQ(*m.segment, 2);
    EXPECT_DOUBLE_EQ(m.distances[2], 0.0);
}

TEST(Segmentation, MatchTieGoesToLowestIndex) {
    // Both clusters hold codes 7 and 255 in equal shares, so their distances are equal.
    const LbpMap lbp = map_of({7, 255, 7, 255}, 2);
    const LabelMap labels{2, 2, 2, {0, 0, 1, 1}};
    const WaterMatch m = match_water_segment(labels, lbp, flat_reference());
    EXPECT_DOUBLE_EQ(m.distances[0], m.distances[1]);
    ASSERT_TRUE(m.segment.has_value());
    EXPECT_EQ(*m.segment, 0);
}

TEST(Segmentation, MatchRejectsAndHandlesEmptyClusters) {
    const LbpMap lbp = map_of({3, 3, 4, 4}, 2);
    const LabelMap labels{2, 2, 3, {0, 0, 1, 1}};
    const WaterMatch m = match_water_segment(labels, lbp, flat_reference());
    EXPECT_FALSE(m.segment.has_value());
    EXPECT_TRUE(std::isinf(m.distances[2]));
    EXPECT_THROW(match_water_segment(labels, lbp, ReferenceSignature{}), Error);
    const LabelMap wrong{4, 1, 2, {0, 0, 1, 1}};
    EXPECT_THROW(match_water_segment(wrong, lbp, flat_reference()), Error);
}

TEST(Segmentation, MatchIsInvariantUnderRelabelling) {
    Rng rng(31);
    const GrayImage img = oracle::random_gray(rng, 18, 18);
    const LbpMap lbp = lbp_map(img, 1);
    LabelMap labels{lbp.width, lbp.height, 4, {}};
    for (std::size_t i = 0; i < lbp.size(); ++i) labels.labels.push_back(lbp.codes[i] % 4);
    const ReferenceSignature ref = synth::ripple_reference(5, 1);
    const WaterMatch a = match_water_segment(labels, lbp, ref, 10.0);
    const int perm[4] = {2, 0, 3, 1};
    LabelMap relabelled = labels;
    for (int& l : relabelled.labels) l = perm[l];
    const WaterMatch b = match_water_segment(relabelled, lbp, ref, 10.0);
    for (int c = 0; c < 4; ++c) EXPECT_DOUBLE_EQ(a.distances[c], b.distances[perm[c]]);
    ASSERT_TRUE(a.segment && b.segment);
    EXPECT_EQ(perm[*a.segment], *b.segment);
}

TEST(Segmentation, RippleHalfIsSelected) {
    // Left half ripple water, right half constant grey.
    const RgbImage ripple = synth::ripple_patch(101, 64, 64);
    RgbImage img = ripple;
    for (int y = 0; y < 64; ++y) {
        for (int x = 32; x < 64; ++x) std::fill_n(img.pixel(x, y), 3, std::uint8_t{150});
    }
    const ReferenceSignature ref = synth::ripple_reference(202, 2);
    SegmentationConfig cfg;
    cfg.k = 2;
    const SegmentationResult r = segment_and_classify(img, ref, cfg);
    ASSERT_TRUE(r.water_segment.has_value());
    const GrayImage mask = water_mask(r, 64, 64);
    int left = 0;
    int right = 0;
    for (int y = 1; y < 63; ++y) {
        for (int x = 1; x < 63; ++x) (x < 32 ? left : right) += mask.at(x, y) == 255;
    }
    EXPECT_GT(left, 31 * 62 * 9 / 10);
    // Only the seam column next to the ripple may pick up its texture.
    EXPECT_LE(right, 62);
}

TEST(Segmentation, DecisionAtFortyPercent) {
    const SegmentationResult r = segment_and_classify(banded(8, 1), flat_reference(), {.k = 2});
    ASSERT_TRUE(r.water_segment.has_value());
    EXPECT_DOUBLE_EQ(r.water_fraction, 0.4);
    EXPECT_EQ(r.decision, FloodLabel::Flooded);
}

TEST(Segmentation, ExactlyQuarterIsNotFlooded) {
    const SegmentationResult r = segment_and_classify(banded(5, 2), flat_reference(), {.k = 2});
    ASSERT_TRUE(r.water_segment.has_value());
    EXPECT_DOUBLE_EQ(r.water_fraction, 0.25);
    EXPECT_EQ(r.decision, FloodLabel::NonFlooded);
    SegmentationConfig lower{.k = 2};
    lower.decision_threshold = 0.2499;
    EXPECT_EQ(segment_and_classify(banded(5, 2), flat_reference(), lower).decision, FloodLabel::Flooded);
}

TEST(Segmentation, NoWaterMeansZeroFraction) {
    // A smooth diagonal ramp: every neighbourhood has a darker side, so no code is 255.
    std::vector<std::uint8_t> data(30 * 30 * 3);
    for (int y = 0; y < 30; ++y) {
        for (int x = 0; x < 30; ++x) {
            std::uint8_t* p = &data[(y * 30 + x) * 3];
            p[0] = static_cast<std::uint8_t>(4 * x + 2 * y);
            p[1] = static_cast<std::uint8_t>(3 * y + x);
            p[2] = static_cast<std::uint8_t>(200 - 3 * x);
        }
    }
    const SegmentationResult r = segment_and_classify(RgbImage(30, 30, data), flat_reference());
    EXPECT_FALSE(r.water_segment.has_value());
    EXPECT_DOUBLE_EQ(r.water_fraction, 0.0);
    EXPECT_EQ(r.decision, FloodLabel::NonFlooded);
    const GrayImage mask = water_mask(r, 30, 30);
    EXPECT_TRUE(std::all_of(mask.data.begin(), mask.data.end(), [](auto v) { return v == 0; }));
}

TEST(Segmentation, AblationAndErrors) {
    const synth::Scene s = synth::make_scene(4, true);
    const ReferenceSignature ref = synth::ripple_reference(9, 2);
    SegmentationConfig off;
    off.use_texture = false;
    const SegmentationResult r = segment_and_classify(s.image, ref, off);
    EXPECT_EQ(r.feature_dim, 3);
    EXPECT_EQ(r.labels.labels.size(), 94u * 94u);
    EXPECT_EQ(segment_and_classify(s.image, ref).feature_dim, 4);
    try {
        segment_and_classify(s.image, ref, {.k = 1});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidK);
    }
    EXPECT_THROW(segment_and_classify(s.image, ReferenceSignature{}), Error);
}

TEST(Segmentation, DeterministicAndMaskShape) {
    const synth::Scene s = synth::make_scene(8, true);
    const ReferenceSignature ref = synth::ripple_reference(3, 2);
    const SegmentationResult a = segment_and_classify(s.image, ref);
    const SegmentationResult b = segment_and_classify(s.image, ref);
    EXPECT_EQ(a.labels.labels, b.labels.labels);
    EXPECT_EQ(a.segment_distances, b.segment_distances);
    const GrayImage mask = water_mask(a, s.image.width, s.image.height);
    EXPECT_EQ(mask.width, 96);
    for (int x = 0; x < 96; ++x) {
        EXPECT_EQ(mask.at(x, 0), 0);
        EXPECT_EQ(mask.at(x, 95), 0);
    }
    std::size_t water = std::count(mask.data.begin(), mask.data.end(), std::uint8_t{255});
    EXPECT_NEAR(static_cast<double>(water) / (94.0 * 94.0), a.water_fraction, 1e-12);
    EXPECT_THROW(water_mask(a, 50, 50), Error);
}

TEST(Segmentation, ReferenceFromConstantRegion) {
    const RgbImage img = RgbImage::filled(10, 10, 40, 80, 120);
    const auto ref = build_reference_signature({{img, full_mask(8, 8)}, {img, full_mask(8, 8)}}, "twice");
    ASSERT_EQ(ref.histograms.size(), 2u);
    EXPECT_DOUBLE_EQ(ref.histograms[0].bins[255], 1.0);
    EXPECT_EQ(ref.histograms[0].bins, ref.histograms[1].bins);
    EXPECT_EQ(ref.source_note, "twice");
}

TEST(Segmentation, ReferenceErrors) {
    const RgbImage img = RgbImage::filled(10, 10, 40, 80, 120);
    BinaryMask none{8, 8, std::vector<std::uint8_t>(64, 0)};
    try {
        build_reference_signature({{img, none}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyMask);
    }
    try {
        build_reference_signature({{img, full_mask(10, 10)}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
    }
    EXPECT_THROW(build_reference_signature({}), Error);
}

TEST(Segmentation, RippleReferenceMatchesRippleWater) {
    const ReferenceSignature ref = synth::ripple_reference(1234, 1);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const synth::Scene s = synth::make_scene(seed, true);
        const LbpMap lbp = lbp_map(rgb_to_gray(s.image), 1);
        // Water pixels whose whole neighbourhood is water.
        BinaryMask inner = synth::interior_mask(s.water);
        for (int y = 0; y < inner.height; ++y) {
            for (int x = 0; x < inner.width; ++x) {
                bool all = true;
                for (int dy = 0; dy <= 2; ++dy) {
                    for (int dx = 0; dx <= 2; ++dx) all = all && s.water.at(x + dx, y + dy) == 255;
                }
                inner.values[static_cast<std::size_t>(y) * inner.width + x] = all ? 1 : 0;
            }
        }
        EXPECT_LT(histogram_distance(lbp_histogram(lbp, inner), ref.histograms[0]), 0.1) << "seed " << seed;
    }
}

TEST(Segmentation, ReferenceFileRoundTrip) {
    const fs::path dir = fs::temp_directory_path() / "floodlens_seg_ref";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const ReferenceSignature ref = synth::ripple_reference(7, 3);
    save_reference(dir / "r.json", ref);
    const ReferenceSignature back = load_reference(dir / "r.json");
    EXPECT_EQ(back.source_note, ref.source_note);
    ASSERT_EQ(back.histograms.size(), ref.histograms.size());
    EXPECT_EQ(back.histograms[0].bins, ref.histograms[0].bins);

    std::ofstream(dir / "bad.json") << "{\"format\": \"something-else\"}";
    EXPECT_THROW(load_reference(dir / "bad.json"), Error);
    EXPECT_THROW(load_reference(dir / "missing.json"), Error);
}

TEST(Segmentation, ColorSpaceNames) {
    EXPECT_EQ(parse_color_space("LAB"), ColorSpace::Lab);
    EXPECT_EQ(parse_color_space("rgb"), ColorSpace::Rgb);
    EXPECT_EQ(to_string(ColorSpace::Lab), "lab");
    EXPECT_THROW(parse_color_space("hsv"), Error);
}
