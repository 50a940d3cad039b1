#include "floodlens/kmeans.hpp"

#include "floodlens/error.hpp"
#include "floodlens/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace floodlens {

namespace {

double squared_distance(const double* a, const double* b, int dim) noexcept {
    double s = 0.0;
    for (int d = 0; d < dim; ++d) {
        const double diff = a[d] - b[d];
        s += diff * diff;
    }
    return s;
}

std::vector<double> plus_plus_init(const PixelFeatureMatrix& f, int k, Rng& rng) {
    const int dim = f.dim;
    std::vector<double> centroids;
    centroids.reserve(static_cast<std::size_t>(k) * dim);
    auto take = [&](std::size_t i) {
        const auto r = f.row(i);
        centroids.insert(centroids.end(), r.begin(), r.end());
    };
    take(rng.below(f.n));

    std::vector<double> nearest(f.n);
    for (std::size_t i = 0; i < f.n; ++i) nearest[i] = squared_distance(f.row(i).data(), centroids.data(), dim);

    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (double d : nearest) total += d;
        std::size_t pick = 0;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            pick = f.n - 1;
            for (std::size_t i = 0; i < f.n; ++i) {
                acc += nearest[i];
                if (acc > target && nearest[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.below(f.n);
        }
        take(pick);
        const double* latest = centroids.data() + static_cast<std::size_t>(c) * dim;
        for (std::size_t i = 0; i < f.n; ++i) {
            nearest[i] = std::min(nearest[i], squared_distance(f.row(i).data(), latest, dim));
        }
    }
    return centroids;
}

double assign(const PixelFeatureMatrix& f, const std::vector<double>& centroids, int k, std::vector<int>& labels,
              std::vector<double>& dist) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < f.n; ++i) {
        const double* p = f.row(i).data();
        int best = 0;
        double best_d = squared_distance(p, centroids.data(), f.dim);
        for (int c = 1; c < k; ++c) {
            const double d = squared_distance(p, centroids.data() + static_cast<std::size_t>(c) * f.dim, f.dim);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        labels[i] = best;
        dist[i] = best_d;
        inertia += best_d;
    }
    return inertia;
}

KMeansResult lloyd(const PixelFeatureMatrix& f, int k, int max_iter, double tol, Rng& rng) {
    const int dim = f.dim;
    KMeansResult res;
    res.k = k;
    res.labels.assign(f.n, 0);
    res.centroids = plus_plus_init(f, k, rng);

    std::vector<double> dist(f.n);
    std::vector<double> sums(static_cast<std::size_t>(k) * dim);
    std::vector<std::size_t> counts(static_cast<std::size_t>(k));

    for (int iter = 1; iter <= max_iter; ++iter) {
        res.inertia_trace.push_back(assign(f, res.centroids, k, res.labels, dist));

        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < f.n; ++i) {
            const int c = res.labels[i];
            ++counts[c];
            const double* p = f.row(i).data();
            double* s = sums.data() + static_cast<std::size_t>(c) * dim;
            for (int d = 0; d < dim; ++d) s[d] += p[d];
        }

        std::vector<double> next(res.centroids.size());
        std::vector<bool> used(f.n, false);
        for (int c = 0; c < k; ++c) {
            double* dst = next.data() + static_cast<std::size_t>(c) * dim;
            if (counts[c] > 0) {
                const double* s = sums.data() + static_cast<std::size_t>(c) * dim;
                for (int d = 0; d < dim; ++d) dst[d] = s[d] / static_cast<double>(counts[c]);
                continue;
            }
            // Empty cluster: move it onto the worst-served point not already taken.
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < f.n; ++i) {
                if (!used[i] && dist[i] > far_d) {
                    far_d = dist[i];
                    far = i;
                }
            }
            used[far] = true;
            const auto r = f.row(far);
            std::copy(r.begin(), r.end(), dst);
        }

        double shift = 0.0;
        for (int c = 0; c < k; ++c) {
            const std::size_t off = static_cast<std::size_t>(c) * dim;
            shift = std::max(shift, std::sqrt(squared_distance(next.data() + off, res.centroids.data() + off, dim)));
        }
        res.centroids = std::move(next);
        res.iterations = iter;
        if (shift <= tol) break;
    }
    res.inertia = assign(f, res.centroids, k, res.labels, dist);
    res.inertia_trace.push_back(res.inertia);
    return res;
}

}  // namespace

KMeansResult kmeans(const PixelFeatureMatrix& features, const KMeansParams& params) {
    if (params.k <= 0) throw Error(ErrorCode::InvalidK, "k must be at least 1, got " + std::to_string(params.k));
    if (features.n < static_cast<std::size_t>(params.k)) {
        throw Error(ErrorCode::TooFewPoints, std::to_string(features.n) + " points for k=" + std::to_string(params.k));
    }
    if (features.dim <= 0 || features.rows.size() != features.n * static_cast<std::size_t>(features.dim)) {
        throw Error(ErrorCode::DimensionMismatch, "feature matrix storage does not match n x dim");
    }
    if (params.max_iter < 1 || !(params.tol >= 0.0) || params.restarts < 1) {
        throw Error(ErrorCode::InvalidArgument, "max_iter and restarts must be >= 1 and tol >= 0");
    }
    KMeansResult best;
    for (int run = 0; run < params.restarts; ++run) {
        Rng rng(mix_seed(params.seed, static_cast<std::uint64_t>(run)));
        KMeansResult r = lloyd(features, params.k, params.max_iter, params.tol, rng);
        if (run == 0 || r.inertia < best.inertia) best = std::move(r);
    }
    return best;
}

double kmeans_inertia(const PixelFeatureMatrix& features, std::span<const int> labels,
                      std::span<const double> centroids) {
    double s = 0.0;
    for (std::size_t i = 0; i < features.n; ++i) {
        s += squared_distance(features.row(i).data(),
                              centroids.data() + static_cast<std::size_t>(labels[i]) * features.dim, features.dim);
    }
    return s;
}

}  // namespace floodlens
