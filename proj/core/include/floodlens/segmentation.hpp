#pragma once

#include "floodlens/imaging.hpp"
#include "floodlens/kmeans.hpp"
#include "floodlens/texture.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace floodlens {

enum class ColorSpace { Lab, Rgb };
std::string_view to_string(ColorSpace cs) noexcept;
/// Accepts "lab" / "rgb" in any case. Throws InvalidArgument.
ColorSpace parse_color_space(std::string_view text);

enum class FloodLabel { NonFlooded = 0, Flooded = 1 };
std::string_view to_string(FloodLabel label) noexcept;

/// Cluster index per LBP-interior pixel, row-major.
struct LabelMap {
    int width = 0;
    int height = 0;
    int k = 0;
    std::vector<int> labels;
};

/// LBP histograms of known water, typically from a different region than the
/// images being classified.
struct ReferenceSignature {
    std::vector<LbpHistogram> histograms;
    std::string source_note;
};

struct SegmentationConfig {
    int k = 3;
    std::uint64_t seed = 0;
    bool use_texture = true;
    ColorSpace color_space = ColorSpace::Lab;
    /// Flooded iff water_fraction is strictly above this.
    double decision_threshold = 0.25;
    /// No water segment when the best chi-square distance exceeds this.
    double reject_threshold = 0.9;
    int max_iter = 100;
    double tol = 1e-4;
    int restarts = 1;
};

struct WaterMatch {
    std::optional<int> segment;
    /// One per cluster; +inf for clusters with no pixels.
    std::vector<double> distances;
};

struct SegmentationResult {
    LabelMap labels;
    std::optional<int> water_segment;
    std::vector<double> segment_distances;
    double water_fraction = 0.0;
    FloodLabel decision = FloodLabel::NonFlooded;
    int feature_dim = 0;
    double inertia = 0.0;
    int iterations = 0;
};

/// Per pixel (L/100, (a+128)/255, (b+128)/255[, code/255]).
/// `lab` must already be cropped to the LBP interior (DimensionMismatch otherwise).
PixelFeatureMatrix build_pixel_features(const LabImage& lab, const LbpMap& lbp, bool use_texture);
/// RGB variant used by the colour-space sweep: (R/255, G/255, B/255[, code/255]).
PixelFeatureMatrix build_pixel_features(const RgbImage& rgb, const LbpMap& lbp, bool use_texture);

/// Picks the cluster whose LBP histogram is closest (minimum over the reference
/// histograms) to the reference. Ties go to the lowest index; distances above
/// reject_threshold yield no segment. Throws DimensionMismatch or EmptyReference.
WaterMatch match_water_segment(const LabelMap& labels, const LbpMap& lbp, const ReferenceSignature& ref,
                               double reject_threshold = 0.9);

/// Full unsupervised pipeline on one image. Throws InvalidK for k < 2.
SegmentationResult segment_and_classify(const RgbImage& img, const ReferenceSignature& ref,
                                        const SegmentationConfig& config = {});

/// One normalized masked histogram per (image, mask) pair; masks cover the
/// radius-1 LBP interior. Throws EmptyMask or DimensionMismatch.
ReferenceSignature build_reference_signature(const std::vector<std::pair<RgbImage, BinaryMask>>& samples,
                                             std::string source_note = {});

/// Water pixels as 255 on a full-size mask; the unlabelled border stays 0.
GrayImage water_mask(const SegmentationResult& result, int image_width, int image_height);

/// Versioned JSON signature files.
void save_reference(const std::filesystem::path& path, const ReferenceSignature& ref);
ReferenceSignature load_reference(const std::filesystem::path& path);

}  // namespace floodlens
