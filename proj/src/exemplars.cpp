#include "enhope/exemplars.hpp"

#include "enhope/error.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace enhope {

using Index = Eigen::Index;

ExemplarMode parse_exemplar_mode(const std::string& text) {
    if (text == "none") return ExemplarMode::none;
    if (text == "kmeans") return ExemplarMode::kmeans;
    if (text == "random") return ExemplarMode::random;
    if (text == "learned" || text == "learned_init_kmeans") return ExemplarMode::learned_init_kmeans;
    if (text == "learned_init_random") return ExemplarMode::learned_init_random;
    throw Error(ErrorKind::config, "unknown exemplar mode '" + text + "'");
}

std::string to_string(ExemplarMode mode) {
    switch (mode) {
    case ExemplarMode::none: return "none";
    case ExemplarMode::kmeans: return "kmeans";
    case ExemplarMode::random: return "random";
    case ExemplarMode::learned_init_kmeans: return "learned_init_kmeans";
    case ExemplarMode::learned_init_random: return "learned_init_random";
    }
    return "none";
}

std::vector<std::size_t> allocate_per_class(const Labels& labels, int class_count, std::size_t z) {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(class_count), 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    const auto present = static_cast<std::size_t>(std::count_if(sizes.begin(), sizes.end(), [](auto s) { return s > 0; }));
    if (z < present) {
        throw Error(ErrorKind::config, "z=" + std::to_string(z) + " is smaller than the " + std::to_string(present) +
                                           " classes present");
    }

    const double n = static_cast<double>(labels.size());
    std::vector<double> quota(sizes.size());
    std::vector<std::size_t> counts(sizes.size(), 0);
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < sizes.size(); ++c) {
        if (sizes[c] == 0) continue;
        quota[c] = static_cast<double>(z) * static_cast<double>(sizes[c]) / n;
        counts[c] = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(quota[c])));
        assigned += counts[c];
    }
    // Largest remainder; strict comparisons keep the lowest class id on ties.
    while (assigned < z) {
        std::size_t best = sizes.size();
        for (std::size_t c = 0; c < sizes.size(); ++c) {
            if (sizes[c] == 0 || counts[c] >= sizes[c]) continue;
            if (best == sizes.size() ||
                quota[c] - static_cast<double>(counts[c]) > quota[best] - static_cast<double>(counts[best])) {
                best = c;
            }
        }
        if (best == sizes.size()) throw Error(ErrorKind::config, "z exceeds the number of samples");
        ++counts[best];
        ++assigned;
    }
    while (assigned > z) {
        std::size_t worst = sizes.size();
        for (std::size_t c = 0; c < sizes.size(); ++c) {
            if (counts[c] <= 1) continue;
            if (worst == sizes.size() ||
                quota[c] - static_cast<double>(counts[c]) < quota[worst] - static_cast<double>(counts[worst])) {
                worst = c;
            }
        }
        --counts[worst];
        --assigned;
    }
    return counts;
}

// ---------------------------------------------------------------- k-means

namespace {

Matrix seed_plus_plus(const Matrix& points, std::size_t k, std::mt19937_64& rng) {
    const Index n = points.rows();
    Matrix centers(static_cast<Index>(k), points.cols());
    std::uniform_int_distribution<Index> pick(0, n - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    centers.row(0) = points.row(pick(rng));
    Vector nearest(n);
    for (Index i = 0; i < n; ++i) nearest(i) = (points.row(i) - centers.row(0)).squaredNorm();

    for (Index c = 1; c < static_cast<Index>(k); ++c) {
        const double total = nearest.sum();
        Index chosen = n - 1;
        if (total > 0.0) {
            double target = unit(rng) * total;
            chosen = -1;
            Index last_positive = 0;
            for (Index i = 0; i < n; ++i) {
                if (nearest(i) <= 0.0) continue;
                last_positive = i;
                target -= nearest(i);
                if (target < 0.0) {
                    chosen = i;
                    break;
                }
            }
            if (chosen < 0) chosen = last_positive;
        } else {
            chosen = pick(rng);
        }
        centers.row(c) = points.row(chosen);
        for (Index i = 0; i < n; ++i) nearest(i) = std::min(nearest(i), (points.row(i) - centers.row(c)).squaredNorm());
    }
    return centers;
}

double assign(const Matrix& points, const Matrix& centers, std::vector<Index>& owner, Vector& cost) {
    double inertia = 0.0;
    for (Index i = 0; i < points.rows(); ++i) {
        Index best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (Index c = 0; c < centers.rows(); ++c) {
            const double d = (points.row(i) - centers.row(c)).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        owner[static_cast<std::size_t>(i)] = best;
        cost(i) = best_d;
        inertia += best_d;
    }
    return inertia;
}

} // namespace

KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, int max_iters, double tolerance) {
    if (k < 1) throw Error(ErrorKind::config, "k-means needs at least one center");
    if (static_cast<Index>(k) > points.rows()) {
        throw Error(ErrorKind::data, "cannot place " + std::to_string(k) + " centers among " +
                                         std::to_string(points.rows()) + " points");
    }
    if (max_iters < 1 || !(tolerance > 0.0)) throw Error(ErrorKind::config, "k-means needs max_iters >= 1 and tolerance > 0");

    std::mt19937_64 rng(seed);
    KMeansResult out;
    out.centers = seed_plus_plus(points, k, rng);

    const Index n = points.rows();
    std::vector<Index> owner(static_cast<std::size_t>(n));
    Vector cost(n);
    for (int it = 0; it < max_iters; ++it) {
        const double inertia = assign(points, out.centers, owner, cost);
        out.inertia.push_back(inertia);
        out.iterations = it + 1;
        if (it > 0) {
            const double prev = out.inertia[out.inertia.size() - 2];
            if (prev - inertia <= tolerance * prev) break;
        }

        std::vector<Index> members(k, 0);
        for (auto o : owner) ++members[static_cast<std::size_t>(o)];
        for (std::size_t c = 0; c < k; ++c) {
            if (members[c] > 0) continue;
            // Re-seed from the point farthest from its center, taking it from
            // a cluster that can spare it.
            Index far = -1;
            for (Index i = 0; i < n; ++i) {
                if (members[static_cast<std::size_t>(owner[static_cast<std::size_t>(i)])] < 2) continue;
                if (far < 0 || cost(i) > cost(far)) far = i;
            }
            if (far < 0) break;
            --members[static_cast<std::size_t>(owner[static_cast<std::size_t>(far)])];
            owner[static_cast<std::size_t>(far)] = static_cast<Index>(c);
            cost(far) = 0.0;
            members[c] = 1;
        }

        Matrix sums = Matrix::Zero(out.centers.rows(), points.cols());
        for (Index i = 0; i < n; ++i) sums.row(owner[static_cast<std::size_t>(i)]) += points.row(i);
        for (std::size_t c = 0; c < k; ++c) {
            if (members[c] > 0) out.centers.row(static_cast<Index>(c)) = sums.row(static_cast<Index>(c)) / static_cast<double>(members[c]);
        }
    }
    return out;
}

namespace {

std::vector<std::vector<std::size_t>> members_by_class(const Dataset& ds) {
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.class_count));
    for (std::size_t i = 0; i < ds.labels.size(); ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
    return by_class;
}

void check_counts(const std::vector<std::vector<std::size_t>>& by_class, const std::vector<std::size_t>& counts) {
    if (counts.size() != by_class.size()) throw Error(ErrorKind::config, "per-class counts do not match class count");
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] > by_class[c].size()) {
            throw Error(ErrorKind::data, "class " + std::to_string(c) + " has " + std::to_string(by_class[c].size()) +
                                             " samples but " + std::to_string(counts[c]) + " exemplars were requested");
        }
    }
}

ExemplarSet assemble(const std::vector<Matrix>& blocks, const std::vector<std::size_t>& counts, Index dim) {
    ExemplarSet set;
    const auto total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    set.vectors.resize(static_cast<Index>(total), dim);
    Index row = 0;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        for (std::size_t e = 0; e < counts[c]; ++e) {
            set.vectors.row(row++) = blocks[c].row(static_cast<Index>(e));
            set.labels.push_back(static_cast<int>(c));
        }
    }
    return set;
}

} // namespace

ExemplarSet kmeans_per_class(const Dataset& ds, const std::vector<std::size_t>& counts, std::uint64_t seed,
                             int max_iters, double tolerance, std::vector<KMeansResult>* per_class) {
    const auto by_class = members_by_class(ds);
    check_counts(by_class, counts);
    const auto classes = static_cast<Index>(counts.size());
    std::vector<KMeansResult> results(counts.size());

#pragma omp parallel for schedule(dynamic, 1) num_threads(parallel::thread_count())
    for (Index c = 0; c < classes; ++c) {
        const auto cu = static_cast<std::size_t>(c);
        if (counts[cu] == 0) continue;
        results[cu] = kmeans(gather_rows(ds.features, by_class[cu]), counts[cu], seed + cu, max_iters, tolerance);
    }

    std::vector<Matrix> blocks;
    for (const auto& r : results) blocks.push_back(r.centers);
    auto set = assemble(blocks, counts, ds.features.cols());
    if (per_class) *per_class = std::move(results);
    return set;
}

ExemplarSet sample_random(const Dataset& ds, const std::vector<std::size_t>& counts, std::uint64_t seed) {
    auto by_class = members_by_class(ds);
    check_counts(by_class, counts);
    std::vector<Matrix> blocks(counts.size());
    for (std::size_t c = 0; c < counts.size(); ++c) {
        auto& members = by_class[c];
        std::mt19937_64 rng(seed + c);
        std::shuffle(members.begin(), members.end(), rng);
        std::vector<std::size_t> chosen(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(counts[c]));
        std::sort(chosen.begin(), chosen.end());
        blocks[c] = gather_rows(ds.features, chosen);
    }
    return assemble(blocks, counts, ds.features.cols());
}

ExemplarSet make_exemplars(const Dataset& ds, const ExemplarConfig& cfg) {
    if (cfg.mode == ExemplarMode::none) return {};
    const auto counts = allocate_per_class(ds.labels, ds.class_count, cfg.z);
    if (cfg.mode == ExemplarMode::random || cfg.mode == ExemplarMode::learned_init_random) {
        return sample_random(ds, counts, cfg.seed);
    }
    return kmeans_per_class(ds, counts, cfg.seed, cfg.kmeans_max_iters, cfg.kmeans_tolerance);
}

} // namespace enhope
