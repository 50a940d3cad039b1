#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace floodlens {

/// n rows of `dim` reals, row-major.
struct PixelFeatureMatrix {
    std::size_t n = 0;
    int dim = 0;
    std::vector<double> rows;

    std::span<const double> row(std::size_t i) const noexcept {
        return {rows.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }
};

struct KMeansParams {
    int k = 3;
    std::uint64_t seed = 0;
    int max_iter = 100;
    double tol = 1e-4;
    /// Independent k-means++ restarts; the lowest-inertia run is kept.
    int restarts = 1;
};

struct KMeansResult {
    int k = 0;
    std::vector<int> labels;
    /// k rows of dim reals.
    std::vector<double> centroids;
    double inertia = 0.0;
    int iterations = 0;
    /// Inertia after every assignment step of the kept run, ending with the final one.
    std::vector<double> inertia_trace;
};

/// Lloyd iterations from a seeded k-means++ start.
///
/// Stops once the largest centroid shift is <= tol or after max_iter rounds.
/// A cluster that empties is re-seeded at the point farthest from its
/// assigned centroid. Distance ties go to the lower cluster index and the
/// centroid sums are accumulated in input order, so the result depends only
/// on (features, params). Throws InvalidK, TooFewPoints or InvalidArgument.
KMeansResult kmeans(const PixelFeatureMatrix& features, const KMeansParams& params);

/// Sum of squared distances from each row to its labelled centroid.
double kmeans_inertia(const PixelFeatureMatrix& features, std::span<const int> labels,
                      std::span<const double> centroids);

}  // namespace floodlens
