#pragma once

#include "enhope/data.hpp"
#include "enhope/objective.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace enhope {

enum class ExemplarMode : std::uint32_t {
    none = 0,  ///< pairwise training, no exemplars
    kmeans = 1,
    random = 2,
    learned_init_kmeans = 3,
    learned_init_random = 4,
};

ExemplarMode parse_exemplar_mode(const std::string& text);
std::string to_string(ExemplarMode mode);
inline bool is_learned(ExemplarMode mode) {
    return mode == ExemplarMode::learned_init_kmeans || mode == ExemplarMode::learned_init_random;
}

struct ExemplarConfig {
    std::size_t z = 20;
    ExemplarMode mode = ExemplarMode::kmeans;
    std::uint64_t seed = 0;
    int kmeans_max_iters = 50;
    double kmeans_tolerance = 1e-6;  ///< relative inertia change
};

struct ExemplarSet {
    Matrix vectors;  ///< z x H, grouped by class in ascending class order
    Labels labels;

    std::size_t size() const { return labels.size(); }
    ExemplarLossState as_loss_state(bool trainable) const { return {vectors, labels, trainable}; }
};

/// Exemplars per class, proportional to class frequency (largest remainder),
/// at least one for every class that has samples. Sums to z.
std::vector<std::size_t> allocate_per_class(const Labels& labels, int class_count, std::size_t z);

struct KMeansResult {
    Matrix centers;
    std::vector<double> inertia;  ///< after each assignment step
    int iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding. Empty clusters are re-seeded
/// with the point farthest from its current center.
KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, int max_iters, double tolerance);

/// Runs `kmeans` inside each class with `counts[c]` centers, seeded with seed + c.
ExemplarSet kmeans_per_class(const Dataset& ds, const std::vector<std::size_t>& counts, std::uint64_t seed,
                             int max_iters, double tolerance, std::vector<KMeansResult>* per_class = nullptr);

/// Samples `counts[c]` distinct members of each class (kept in dataset order).
ExemplarSet sample_random(const Dataset& ds, const std::vector<std::size_t>& counts, std::uint64_t seed);

/// Allocation followed by the initializer that `cfg.mode` calls for.
ExemplarSet make_exemplars(const Dataset& ds, const ExemplarConfig& cfg);

} // namespace enhope
