#include "adaprompt/kmeans.hpp"

#include "adaprompt/error.hpp"
#include "adaprompt/hashing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace adaprompt {

namespace {

using Points = std::span<const std::vector<double>>;

std::vector<std::vector<double>> seed_centroids(Points points, std::size_t k, std::uint64_t seed) {
    SeededRng rng(seed);
    std::vector<std::size_t> chosen;
    chosen.push_back(static_cast<std::size_t>(rng.below(points.size())));
    std::vector<double> nearest(points.size(), std::numeric_limits<double>::infinity());
    while (chosen.size() < k) {
        const auto& last = points[chosen.back()];
        double total = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            nearest[i] = std::min(nearest[i], squared_distance(points[i], last));
            total += nearest[i];
        }
        std::size_t pick = points.size();
        if (total > 0.0) {
            const double target = rng.unit() * total;
            double running = 0.0;
            for (std::size_t i = 0; i < points.size(); ++i) {
                running += nearest[i];
                if (nearest[i] > 0.0 && running > target) {
                    pick = i;
                    break;
                }
            }
            if (pick == points.size()) {
                // Rounding left target beyond the last increment.
                for (std::size_t i = points.size(); i-- > 0;) {
                    if (nearest[i] > 0.0) {
                        pick = i;
                        break;
                    }
                }
            }
        } else {
            for (std::size_t i = 0; i < points.size(); ++i) {
                if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) {
                    pick = i;
                    break;
                }
            }
        }
        chosen.push_back(pick);
    }
    std::vector<std::vector<double>> centroids;
    centroids.reserve(k);
    for (auto index : chosen) {
        centroids.push_back(points[index]);
    }
    return centroids;
}

std::vector<std::size_t> assign(Points points, const std::vector<std::vector<double>>& centroids) {
    std::vector<std::size_t> assignment(points.size(), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centroids.size(); ++c) {
            const double d = squared_distance(points[i], centroids[c]);
            if (d < best) {
                best = d;
                assignment[i] = c;
            }
        }
    }
    return assignment;
}

void fill_empty_clusters(Points points, const std::vector<std::vector<double>>& centroids,
                         std::vector<std::size_t>& assignment) {
    const std::size_t k = centroids.size();
    for (std::size_t empty = 0; empty < k; ++empty) {
        std::vector<std::size_t> sizes(k, 0);
        for (auto c : assignment) ++sizes[c];
        if (sizes[empty] > 0) {
            continue;
        }
        std::size_t farthest = points.size();
        double worst = -1.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (sizes[assignment[i]] < 2) continue;
            const double d = squared_distance(points[i], centroids[assignment[i]]);
            if (d > worst) {
                worst = d;
                farthest = i;
            }
        }
        if (farthest == points.size()) {
            throw Error(ErrorCode::DegenerateClustering, "cannot refill an empty cluster");
        }
        assignment[farthest] = empty;
    }
}

std::vector<std::vector<double>> means(Points points, const std::vector<std::size_t>& assignment, std::size_t k) {
    const std::size_t dim = points.front().size();
    std::vector<std::vector<double>> centroids(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        auto& c = centroids[assignment[i]];
        for (std::size_t d = 0; d < dim; ++d) c[d] += points[i][d];
        ++sizes[assignment[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
        for (auto& v : centroids[c]) v /= static_cast<double>(sizes[c]);
    }
    return centroids;
}

double inertia_of(Points points, const std::vector<std::vector<double>>& centroids,
                  const std::vector<std::size_t>& assignment) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        total += squared_distance(points[i], centroids[assignment[i]]);
    }
    return total;
}

} // namespace

std::vector<double> l2_normalized(std::vector<double> v) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
        for (double& x : v) x /= norm;
    }
    return v;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        total += d * d;
    }
    return total;
}

KMeansResult kmeans(Points points, const KMeansOptions& options) {
    if (options.k == 0) {
        throw Error(ErrorCode::InvalidConfig, "k-means needs k >= 1");
    }
    if (points.size() < options.k) {
        throw Error(ErrorCode::DegenerateClustering, "fewer points than clusters");
    }
    const std::size_t dim = points.front().size();
    if (dim == 0 || std::any_of(points.begin(), points.end(), [&](const auto& p) { return p.size() != dim; })) {
        throw Error(ErrorCode::InvalidConfig, "k-means input vectors must share a non-zero dimension");
    }
    KMeansResult result;
    result.centroids = seed_centroids(points, options.k, options.seed);
    double previous = std::numeric_limits<double>::infinity();
    for (std::size_t iteration = 1; iteration <= options.max_iterations; ++iteration) {
        result.assignment = assign(points, result.centroids);
        fill_empty_clusters(points, result.centroids, result.assignment);
        result.centroids = means(points, result.assignment, options.k);
        result.inertia = inertia_of(points, result.centroids, result.assignment);
        result.iterations = iteration;
        if (std::isfinite(previous)) {
            if (previous <= 0.0 || (previous - result.inertia) / previous < options.relative_tolerance) {
                break;
            }
        }
        previous = result.inertia;
    }
    return result;
}

} // namespace adaprompt
