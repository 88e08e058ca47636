#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "enhope/error.hpp"
#include "enhope/exemplars.hpp"
#include "oracles.hpp"

#include <algorithm>

using namespace enhope;

namespace {

Dataset make(const Matrix& X, Labels y, int classes) {
    Dataset ds;
    ds.features = X;
    ds.labels = std::move(y);
    ds.class_count = classes;
    return ds;
}

Dataset blobs(std::mt19937_64& rng, std::size_t per_class, int classes, Eigen::Index dim) {
    Matrix X = oracle::random_matrix(rng, static_cast<Eigen::Index>(per_class) * classes, dim);
    Labels y;
    for (int c = 0; c < classes; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            X.row(static_cast<Eigen::Index>(y.size())).array() += 8.0 * c;
            y.push_back(c);
        }
    }
    return make(X, y, classes);
}

double within_class_inertia(const Dataset& ds, const ExemplarSet& ex) {
    double total = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < ex.size(); ++j) {
            if (ex.labels[j] != ds.labels[i]) continue;
            best = std::min(best, (ds.features.row(static_cast<Eigen::Index>(i)) - ex.vectors.row(static_cast<Eigen::Index>(j)))
                                      .squaredNorm());
        }
        total += best;
    }
    return total;
}

} // namespace

TEST_CASE("allocate_per_class examples") {
    Labels balanced;
    for (int c = 0; c < 10; ++c) balanced.insert(balanced.end(), 50, c);
    CHECK(allocate_per_class(balanced, 10, 10) == std::vector<std::size_t>(10, 1));
    CHECK(allocate_per_class(balanced, 10, 20) == std::vector<std::size_t>(10, 2));

    Labels skewed;
    skewed.insert(skewed.end(), 70, 0);
    skewed.insert(skewed.end(), 20, 1);
    skewed.insert(skewed.end(), 10, 2);
    CHECK(allocate_per_class(skewed, 3, 10) == std::vector<std::size_t>{7, 2, 1});

    Labels tiny(98, 0);
    tiny.push_back(1);
    tiny.push_back(2);
    const auto counts = allocate_per_class(tiny, 4, 5);
    CHECK(counts[1] >= 1);
    CHECK(counts[2] >= 1);
    CHECK(counts[3] == 0);
    CHECK(counts[0] + counts[1] + counts[2] == 5);

    CHECK_THROWS_AS(allocate_per_class(tiny, 4, 2), Error);
}

TEST_CASE("kmeans small exact cases") {
    Matrix two(2, 1);
    two << 0, 2;
    const auto one_center = kmeans_per_class(make(two, {0, 0}, 2), {1, 0}, 1, 50, 1e-6);
    CHECK(one_center.vectors(0, 0) == doctest::Approx(1.0));

    Matrix four(4, 1);
    four << 0, 0.1, 10, 10.1;
    const auto pair = kmeans_per_class(make(four, {0, 0, 0, 0}, 2), {2, 0}, 5, 50, 1e-6);
    std::vector<double> centers = {pair.vectors(0, 0), pair.vectors(1, 0)};
    std::sort(centers.begin(), centers.end());
    CHECK(centers[0] == doctest::Approx(0.05));
    CHECK(centers[1] == doctest::Approx(10.05));
}

TEST_CASE("kmeans beats random exemplars and its inertia never increases") {
    std::mt19937_64 rng(9);
    const Dataset ds = blobs(rng, 200, 2, 3);
    std::vector<KMeansResult> runs;
    const ExemplarSet km = kmeans_per_class(ds, {3, 3}, 4, 50, 1e-9, &runs);
    const ExemplarSet rnd = sample_random(ds, {3, 3}, 4);
    CHECK(within_class_inertia(ds, km) <= within_class_inertia(ds, rnd));
    REQUIRE(runs.size() == 2);
    for (const auto& run : runs) {
        for (std::size_t i = 1; i < run.inertia.size(); ++i) CHECK(run.inertia[i] <= run.inertia[i - 1] * (1 + 1e-12));
    }
}

TEST_CASE("kmeans handles duplicates and k equal to the point count") {
    Matrix same = Matrix::Ones(5, 2);
    const KMeansResult r = kmeans(same, 3, 1, 50, 1e-6);
    CHECK(r.centers.rows() == 3);
    CHECK(r.centers.allFinite());
    std::mt19937_64 rng(2);
    const Matrix pts = oracle::random_matrix(rng, 4, 2);
    const KMeansResult all = kmeans(pts, 4, 1, 50, 1e-6);
    CHECK(all.inertia.back() == doctest::Approx(0.0));
    CHECK_THROWS_AS(kmeans(pts, 5, 1, 50, 1e-6), Error);
}

TEST_CASE("sample_random selection rules") {
    std::mt19937_64 rng(10);
    const Dataset small = blobs(rng, 4, 2, 2);
    const ExemplarSet whole = sample_random(small, {4, 4}, 3);
    CHECK(whole.vectors == small.features);

    const Dataset big = blobs(rng, 1000, 1, 2);
    Dataset big2 = big;
    big2.class_count = 2;
    const ExemplarSet a = sample_random(big2, {10, 0}, 1);
    const ExemplarSet b = sample_random(big2, {10, 0}, 1);
    const ExemplarSet c = sample_random(big2, {10, 0}, 2);
    CHECK(a.vectors == b.vectors);
    CHECK(a.vectors != c.vectors);
}

TEST_CASE("make_exemplars: labels follow allocation, vectors stay in the class box, learned modes initialize") {
    std::mt19937_64 rng(11);
    Dataset ds = blobs(rng, 60, 3, 4);
    for (auto mode : {ExemplarMode::kmeans, ExemplarMode::random, ExemplarMode::learned_init_kmeans,
                      ExemplarMode::learned_init_random}) {
        const ExemplarSet ex = make_exemplars(ds, {6, mode, 7});
        CHECK(ex.size() == 6);
        CHECK(ex.labels == Labels{0, 0, 1, 1, 2, 2});
        for (std::size_t j = 0; j < ex.size(); ++j) {
            const int c = ex.labels[j];
            for (Eigen::Index d = 0; d < 4; ++d) {
                double lo = std::numeric_limits<double>::infinity(), hi = -lo;
                for (std::size_t i = 0; i < ds.size(); ++i) {
                    if (ds.labels[i] != c) continue;
                    lo = std::min(lo, ds.features(static_cast<Eigen::Index>(i), d));
                    hi = std::max(hi, ds.features(static_cast<Eigen::Index>(i), d));
                }
                CHECK(ex.vectors(static_cast<Eigen::Index>(j), d) >= lo - 1e-12);
                CHECK(ex.vectors(static_cast<Eigen::Index>(j), d) <= hi + 1e-12);
            }
        }
    }
    CHECK(make_exemplars(ds, {6, ExemplarMode::none, 7}).size() == 0);
    CHECK(parse_exemplar_mode("learned") == ExemplarMode::learned_init_kmeans);
    CHECK_THROWS_AS(parse_exemplar_mode("cluster"), Error);
}
