#include "floodlens/segmentation.hpp"

#include "floodlens/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>

namespace floodlens {

namespace {

constexpr int kSegmentationRadius = 1;
constexpr std::string_view kReferenceFormat = "floodlens-reference";
constexpr int kReferenceVersion = 1;

void require_same_shape(int w, int h, const LbpMap& lbp, std::string_view what) {
    if (w != lbp.width || h != lbp.height) {
        throw Error(ErrorCode::DimensionMismatch, std::string(what) + " is " + std::to_string(w) + "x" +
                                                      std::to_string(h) + " but the LBP map is " +
                                                      std::to_string(lbp.width) + "x" + std::to_string(lbp.height));
    }
}

template <typename ColorFn>
PixelFeatureMatrix assemble(std::size_t n, const LbpMap& lbp, bool use_texture, ColorFn color) {
    PixelFeatureMatrix m;
    m.n = n;
    m.dim = use_texture ? 4 : 3;
    m.rows.resize(n * static_cast<std::size_t>(m.dim));
    double* out = m.rows.data();
    for (std::size_t i = 0; i < n; ++i) {
        color(i, out);
        if (use_texture) out[3] = lbp.codes[i] / 255.0;
        out += m.dim;
    }
    return m;
}

}  // namespace

std::string_view to_string(ColorSpace cs) noexcept { return cs == ColorSpace::Lab ? "lab" : "rgb"; }

ColorSpace parse_color_space(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "lab") return ColorSpace::Lab;
    if (lower == "rgb") return ColorSpace::Rgb;
    throw Error(ErrorCode::InvalidArgument, "unknown colour space '" + std::string(text) + "'");
}

std::string_view to_string(FloodLabel label) noexcept {
    return label == FloodLabel::Flooded ? "flooded" : "non-flooded";
}

PixelFeatureMatrix build_pixel_features(const LabImage& lab, const LbpMap& lbp, bool use_texture) {
    require_same_shape(lab.width, lab.height, lbp, "LAB image");
    return assemble(lab.pixel_count(), lbp, use_texture, [&](std::size_t i, double* out) {
        const double* p = &lab.data[3 * i];
        out[0] = std::clamp(p[0] / 100.0, 0.0, 1.0);
        out[1] = std::clamp((p[1] + 128.0) / 255.0, 0.0, 1.0);
        out[2] = std::clamp((p[2] + 128.0) / 255.0, 0.0, 1.0);
    });
}

PixelFeatureMatrix build_pixel_features(const RgbImage& rgb, const LbpMap& lbp, bool use_texture) {
    require_same_shape(rgb.width, rgb.height, lbp, "RGB image");
    return assemble(rgb.pixel_count(), lbp, use_texture, [&](std::size_t i, double* out) {
        out[0] = rgb.data[3 * i] / 255.0;
        out[1] = rgb.data[3 * i + 1] / 255.0;
        out[2] = rgb.data[3 * i + 2] / 255.0;
    });
}

WaterMatch match_water_segment(const LabelMap& labels, const LbpMap& lbp, const ReferenceSignature& ref,
                               double reject_threshold) {
    if (ref.histograms.empty()) throw Error(ErrorCode::EmptyReference, "reference signature has no histograms");
    require_same_shape(labels.width, labels.height, lbp, "label map");
    if (labels.labels.size() != lbp.codes.size()) {
        throw Error(ErrorCode::DimensionMismatch, "label count does not match LBP map");
    }
    const int k = labels.k;
    std::vector<std::array<std::uint64_t, kLbpBins>> counts(static_cast<std::size_t>(k));
    std::vector<std::uint64_t> totals(static_cast<std::size_t>(k), 0);
    for (auto& c : counts) c.fill(0);
    for (std::size_t i = 0; i < labels.labels.size(); ++i) {
        const int c = labels.labels[i];
        if (c < 0 || c >= k) throw Error(ErrorCode::InvalidArgument, "label " + std::to_string(c) + " outside [0,k)");
        ++counts[c][lbp.codes[i]];
        ++totals[c];
    }

    WaterMatch match;
    match.distances.assign(static_cast<std::size_t>(k), std::numeric_limits<double>::infinity());
    for (int c = 0; c < k; ++c) {
        if (totals[c] == 0) continue;
        LbpHistogram h;
        h.normalized = true;
        h.bins.resize(kLbpBins);
        for (int b = 0; b < kLbpBins; ++b) h.bins[b] = static_cast<double>(counts[c][b]) / static_cast<double>(totals[c]);
        double best = std::numeric_limits<double>::infinity();
        for (const LbpHistogram& r : ref.histograms) best = std::min(best, histogram_distance(h, r));
        match.distances[c] = best;
    }
    const auto it = std::min_element(match.distances.begin(), match.distances.end());
    if (it != match.distances.end() && std::isfinite(*it) && *it <= reject_threshold) {
        match.segment = static_cast<int>(it - match.distances.begin());
    }
    return match;
}

SegmentationResult segment_and_classify(const RgbImage& img, const ReferenceSignature& ref,
                                        const SegmentationConfig& config) {
    if (config.k < 2) throw Error(ErrorCode::InvalidK, "segmentation needs k >= 2, got " + std::to_string(config.k));
    if (ref.histograms.empty()) throw Error(ErrorCode::EmptyReference, "reference signature has no histograms");

    const LbpMap lbp = lbp_map(rgb_to_gray(img), kSegmentationRadius);
    const PixelFeatureMatrix features =
        config.color_space == ColorSpace::Lab
            ? build_pixel_features(crop(rgb_to_lab(img), kSegmentationRadius), lbp, config.use_texture)
            : build_pixel_features(crop(img, kSegmentationRadius), lbp, config.use_texture);

    KMeansResult km = kmeans(features, {.k = config.k,
                                        .seed = config.seed,
                                        .max_iter = config.max_iter,
                                        .tol = config.tol,
                                        .restarts = config.restarts});

    SegmentationResult out;
    out.feature_dim = features.dim;
    out.inertia = km.inertia;
    out.iterations = km.iterations;
    out.labels = LabelMap{lbp.width, lbp.height, config.k, std::move(km.labels)};

    WaterMatch match = match_water_segment(out.labels, lbp, ref, config.reject_threshold);
    out.water_segment = match.segment;
    out.segment_distances = std::move(match.distances);
    if (out.water_segment) {
        const auto water = std::count(out.labels.labels.begin(), out.labels.labels.end(), *out.water_segment);
        out.water_fraction = static_cast<double>(water) / static_cast<double>(out.labels.labels.size());
    }
    out.decision = out.water_fraction > config.decision_threshold ? FloodLabel::Flooded : FloodLabel::NonFlooded;
    return out;
}

ReferenceSignature build_reference_signature(const std::vector<std::pair<RgbImage, BinaryMask>>& samples,
                                             std::string source_note) {
    if (samples.empty()) throw Error(ErrorCode::EmptyReference, "no reference images supplied");
    ReferenceSignature ref;
    ref.source_note = std::move(source_note);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& [img, mask] = samples[i];
        const LbpMap lbp = lbp_map(rgb_to_gray(img), kSegmentationRadius);
        LbpHistogram h = lbp_histogram(lbp, mask);
        if (h.empty) throw Error(ErrorCode::EmptyMask, "reference sample " + std::to_string(i) + " has no water pixels");
        ref.histograms.push_back(std::move(h));
    }
    return ref;
}

GrayImage water_mask(const SegmentationResult& result, int image_width, int image_height) {
    const int margin = kSegmentationRadius;
    if (image_width - 2 * margin != result.labels.width || image_height - 2 * margin != result.labels.height) {
        throw Error(ErrorCode::DimensionMismatch, "label map does not match the image size");
    }
    GrayImage mask(image_width, image_height,
                   std::vector<std::uint8_t>(static_cast<std::size_t>(image_width) * image_height, 0));
    if (!result.water_segment) return mask;
    const int water = *result.water_segment;
    for (int y = 0; y < result.labels.height; ++y) {
        for (int x = 0; x < result.labels.width; ++x) {
            if (result.labels.labels[static_cast<std::size_t>(y) * result.labels.width + x] == water) {
                mask.data[static_cast<std::size_t>(y + margin) * image_width + x + margin] = 255;
            }
        }
    }
    return mask;
}

void save_reference(const std::filesystem::path& path, const ReferenceSignature& ref) {
    nlohmann::json j;
    j["format"] = kReferenceFormat;
    j["version"] = kReferenceVersion;
    j["lbp_radius"] = kSegmentationRadius;
    j["bins"] = kLbpBins;
    j["source_note"] = ref.source_note;
    j["histograms"] = nlohmann::json::array();
    for (const auto& h : ref.histograms) j["histograms"].push_back(h.bins);
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

ReferenceSignature load_reference(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::FileNotFound, path.string());
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::FormatError, path.string() + ": " + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != kReferenceFormat || j.at("version").get<int>() != kReferenceVersion) {
            throw Error(ErrorCode::FormatError, path.string() + " is not a version 1 reference signature");
        }
        ReferenceSignature ref;
        ref.source_note = j.value("source_note", std::string{});
        for (const auto& hj : j.at("histograms")) {
            LbpHistogram h;
            h.bins = hj.get<std::vector<double>>();
            h.normalized = true;
            if (h.bins.size() != kLbpBins) {
                throw Error(ErrorCode::FormatError, "reference histogram has " + std::to_string(h.bins.size()) + " bins");
            }
            double sum = 0.0;
            for (double v : h.bins) sum += v;
            if (std::abs(sum - 1.0) > 1e-6) throw Error(ErrorCode::NotNormalized, "reference histogram sums to " + std::to_string(sum));
            ref.histograms.push_back(std::move(h));
        }
        if (ref.histograms.empty()) throw Error(ErrorCode::EmptyReference, path.string() + " holds no histograms");
        return ref;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::FormatError, path.string() + ": " + e.what());
    }
}

}  // namespace floodlens
