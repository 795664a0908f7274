#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace adaprompt {

struct KMeansOptions {
    std::size_t k = 1;
    std::uint64_t seed = 0;
    std::size_t max_iterations = 100;
    /// Stop once (previous - current) / previous inertia drops below this.
    double relative_tolerance = 1e-4;
};

struct KMeansResult {
    std::vector<std::vector<double>> centroids;
    /// Cluster index per point; every cluster is non-empty.
    std::vector<std::size_t> assignment;
    double inertia = 0.0;
    std::size_t iterations = 0;
};

/// Unit-length copy; the zero vector is returned unchanged.
std::vector<double> l2_normalized(std::vector<double> v);

double squared_distance(std::span<const double> a, std::span<const double> b);

/// Lloyd's algorithm with k-means++ seeding from `seed`, Euclidean distance.
/// Assignment ties go to the lower cluster index. A cluster left empty takes
/// the point farthest from its own centroid among clusters with more than one
/// member. Throws Error(DegenerateClustering) when that is impossible
/// (fewer points than clusters) and Error(InvalidConfig) on k = 0 or ragged input.
KMeansResult kmeans(std::span<const std::vector<double>> points, const KMeansOptions& options);

} // namespace adaprompt
