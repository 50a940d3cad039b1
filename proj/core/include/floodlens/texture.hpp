#pragma once

#include "floodlens/imaging.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace floodlens {

inline constexpr int kLbpNeighbors = 8;
inline constexpr int kLbpBins = 256;
inline constexpr int kFeature512Size = 2 * kLbpBins;

/// Basic 8-neighbour LBP codes over the image interior.
///
/// Neighbour i sets bit i when its value is >= the centre. Neighbours are
/// sampled at distance `radius` (no interpolation), starting top-left and
/// running clockwise: TL, T, TR, R, BR, B, BL, L.
struct LbpMap {
    int width = 0;
    int height = 0;
    int radius = 1;
    std::vector<std::uint8_t> codes;

    std::size_t size() const noexcept { return codes.size(); }
    std::uint8_t at(int x, int y) const noexcept { return codes[static_cast<std::size_t>(y) * width + x]; }
};

/// Per-pixel selection over an LbpMap (non-zero = selected).
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> values;

    std::size_t count() const noexcept;
};

struct LbpHistogram {
    std::vector<double> bins;
    bool normalized = false;
    /// Set when no pixel contributed; bins are then all zero.
    bool empty = false;
};

/// Radius-1 histogram followed by the radius-2 histogram, both normalized.
struct LbpFeature512 {
    std::vector<double> values;
};

/// (dx, dy) of neighbour `i` for the given radius.
struct Offset {
    int dx;
    int dy;
};
Offset lbp_neighbor_offset(int index, int radius) noexcept;

/// radius must be 1 or 2 (InvalidArgument); the image must exceed 2*radius in both
/// axes (ImageTooSmall).
LbpMap lbp_map(const GrayImage& img, int radius);

LbpHistogram lbp_histogram(const LbpMap& map);
/// Counts only pixels where the mask is set. Throws DimensionMismatch.
LbpHistogram lbp_histogram(const LbpMap& map, const BinaryMask& mask);

/// Throws ImageTooSmall for images under 5x5.
LbpFeature512 lbp_feature_512(const GrayImage& img);

inline constexpr double kChiSquareEpsilon = 1e-10;

/// Chi-square distance 0.5 * sum (a-b)^2 / (a+b+eps).
/// Throws NotNormalized or DimensionMismatch.
double histogram_distance(const LbpHistogram& a, const LbpHistogram& b);

}  // namespace floodlens
