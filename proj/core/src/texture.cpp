#include "floodlens/texture.hpp"

#include "floodlens/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace floodlens {

namespace {

constexpr std::array<Offset, kLbpNeighbors> kUnitRing{{
    {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0},
}};

LbpHistogram normalize_counts(const std::array<std::uint64_t, kLbpBins>& counts, std::uint64_t total) {
    LbpHistogram h;
    h.bins.assign(kLbpBins, 0.0);
    h.normalized = true;
    h.empty = total == 0;
    if (total == 0) return h;
    const auto denom = static_cast<double>(total);
    for (int i = 0; i < kLbpBins; ++i) h.bins[i] = static_cast<double>(counts[i]) / denom;
    return h;
}

bool looks_normalized(const LbpHistogram& h) {
    if (!h.normalized) return false;
    double sum = 0.0;
    for (double v : h.bins) {
        if (!(v >= 0.0)) return false;
        sum += v;
    }
    return sum == 0.0 || std::abs(sum - 1.0) <= 1e-6;
}

}  // namespace

std::size_t BinaryMask::count() const noexcept {
    return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](std::uint8_t v) { return v != 0; }));
}

Offset lbp_neighbor_offset(int index, int radius) noexcept {
    const Offset unit = kUnitRing[static_cast<std::size_t>(index)];
    return {unit.dx * radius, unit.dy * radius};
}

LbpMap lbp_map(const GrayImage& img, int radius) {
    if (radius != 1 && radius != 2) {
        throw Error(ErrorCode::InvalidArgument, "LBP radius must be 1 or 2, got " + std::to_string(radius));
    }
    if (img.width <= 2 * radius || img.height <= 2 * radius) {
        throw Error(ErrorCode::ImageTooSmall, "LBP radius " + std::to_string(radius) + " needs more than " +
                                                  std::to_string(2 * radius) + " pixels per axis, got " +
                                                  std::to_string(img.width) + "x" + std::to_string(img.height));
    }
    LbpMap out;
    out.radius = radius;
    out.width = img.width - 2 * radius;
    out.height = img.height - 2 * radius;
    out.codes.resize(static_cast<std::size_t>(out.width) * out.height);

    // Neighbour offsets as flat strides into the source buffer.
    std::array<std::ptrdiff_t, kLbpNeighbors> strides{};
    for (int i = 0; i < kLbpNeighbors; ++i) {
        const Offset o = lbp_neighbor_offset(i, radius);
        strides[i] = static_cast<std::ptrdiff_t>(o.dy) * img.width + o.dx;
    }
    const std::uint8_t* src = img.data.data();
    std::uint8_t* dst = out.codes.data();
    for (int y = radius; y < img.height - radius; ++y) {
        const std::uint8_t* row = src + static_cast<std::ptrdiff_t>(y) * img.width;
        for (int x = radius; x < img.width - radius; ++x) {
            const std::uint8_t* c = row + x;
            const std::uint8_t centre = *c;
            unsigned code = 0;
            for (int i = 0; i < kLbpNeighbors; ++i) {
                code |= static_cast<unsigned>(c[strides[i]] >= centre) << i;
            }
            *dst++ = static_cast<std::uint8_t>(code);
        }
    }
    return out;
}

LbpHistogram lbp_histogram(const LbpMap& map) {
    std::array<std::uint64_t, kLbpBins> counts{};
    for (std::uint8_t c : map.codes) ++counts[c];
    return normalize_counts(counts, map.codes.size());
}

LbpHistogram lbp_histogram(const LbpMap& map, const BinaryMask& mask) {
    if (mask.width != map.width || mask.height != map.height || mask.values.size() != map.codes.size()) {
        throw Error(ErrorCode::DimensionMismatch, "mask " + std::to_string(mask.width) + "x" +
                                                      std::to_string(mask.height) + " vs LBP map " +
                                                      std::to_string(map.width) + "x" + std::to_string(map.height));
    }
    std::array<std::uint64_t, kLbpBins> counts{};
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < map.codes.size(); ++i) {
        if (mask.values[i] != 0) {
            ++counts[map.codes[i]];
            ++total;
        }
    }
    return normalize_counts(counts, total);
}

LbpFeature512 lbp_feature_512(const GrayImage& img) {
    const LbpHistogram near = lbp_histogram(lbp_map(img, 1));
    const LbpHistogram far = lbp_histogram(lbp_map(img, 2));
    LbpFeature512 f;
    f.values.reserve(kFeature512Size);
    f.values.insert(f.values.end(), near.bins.begin(), near.bins.end());
    f.values.insert(f.values.end(), far.bins.begin(), far.bins.end());
    return f;
}

double histogram_distance(const LbpHistogram& a, const LbpHistogram& b) {
    if (a.bins.size() != b.bins.size()) {
        throw Error(ErrorCode::DimensionMismatch, "histograms have " + std::to_string(a.bins.size()) + " and " +
                                                      std::to_string(b.bins.size()) + " bins");
    }
    if (!looks_normalized(a) || !looks_normalized(b)) {
        throw Error(ErrorCode::NotNormalized, "chi-square distance needs normalized histograms");
    }
    double d = 0.0;
    for (std::size_t i = 0; i < a.bins.size(); ++i) {
        const double diff = a.bins[i] - b.bins[i];
        d += diff * diff / (a.bins[i] + b.bins[i] + kChiSquareEpsilon);
    }
    return 0.5 * d;
}

}  // namespace floodlens
