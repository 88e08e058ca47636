#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "enhope/data.hpp"
#include "enhope/error.hpp"
#include "support.hpp"

#include <numeric>
#include <set>

using namespace enhope;

TEST_CASE("load_idx maps byte 255 to 1.0") {
    support::TempDir dir;
    std::vector<unsigned char> px(16, 0);
    px[0] = 255;
    px[5] = 51;
    support::write_file(dir / "img", support::idx_images(4, 2, 2, px));
    support::write_file(dir / "lab", support::idx_labels({0, 1, 1, 0}));
    const Dataset ds = load_idx(dir / "img", dir / "lab");
    CHECK(ds.size() == 4);
    CHECK(ds.feature_dim() == 4);
    CHECK(ds.class_count == 2);
    CHECK(ds.features(0, 0) == 1.0);
    CHECK(ds.features(1, 1) == doctest::Approx(0.2));
    CHECK(ds.labels == Labels{0, 1, 1, 0});
    CHECK(ds.class_names == std::vector<std::string>{"0", "1"});
}

TEST_CASE("load_idx rejects count mismatches, bad magic and truncation") {
    support::TempDir dir;
    support::write_file(dir / "img", support::idx_images(10, 1, 1, std::vector<unsigned char>(10, 7)));
    support::write_file(dir / "lab", support::idx_labels(std::vector<unsigned char>(9, 1)));
    CHECK_THROWS_AS(load_idx(dir / "img", dir / "lab"), Error);

    support::write_file(dir / "lab10", support::idx_labels(std::vector<unsigned char>(10, 1)));
    support::write_file(dir / "bad", support::idx_labels(std::vector<unsigned char>(10, 1)));
    CHECK_THROWS_WITH_AS(load_idx(dir / "bad", dir / "lab10"), doctest::Contains("magic"), Error);

    support::write_file(dir / "short", support::idx_images(10, 1, 1, std::vector<unsigned char>(6, 7)));
    CHECK_THROWS_WITH_AS(load_idx(dir / "short", dir / "lab10"), doctest::Contains("offset"), Error);

    CHECK_THROWS_AS(load_idx(dir / "missing", dir / "lab10"), Error);
}

TEST_CASE("load_idx reads the gzip MNIST subset") {
    const std::filesystem::path root = ENHOPE_DATA_DIR "/mnist-subset";
    const Dataset ds = load_idx(root / "t10k-images-idx3-ubyte.gz", root / "t10k-labels-idx1-ubyte.gz");
    CHECK(ds.size() == 2000);
    CHECK(ds.feature_dim() == 784);
    CHECK(ds.class_count == 10);
    CHECK(ds.features.minCoeff() >= 0.0);
    CHECK(ds.features.maxCoeff() <= 1.0);
}

TEST_CASE("load_csv codes labels by first appearance") {
    support::TempDir dir;
    support::write_file(dir / "a.csv", "1,2,b\n3,4,a\n5,6,b\n");
    const Dataset ds = load_csv(dir / "a.csv");
    CHECK(ds.labels == Labels{0, 1, 0});
    CHECK(ds.class_count == 2);
    CHECK(ds.class_names == std::vector<std::string>{"b", "a"});
    CHECK(ds.features(2, 1) == 6.0);
}

TEST_CASE("load_csv reports ragged rows and bad cells with their line") {
    support::TempDir dir;
    support::write_file(dir / "r.csv", "1,2,3,4,5,x\n1,2,3,4,5,y\n1,2,3,4,x\n");
    CHECK_THROWS_WITH_AS(load_csv(dir / "r.csv"), doctest::Contains(":3"), Error);

    support::write_file(dir / "n.csv", "1,2,a\n1,oops,b\n");
    CHECK_THROWS_WITH_AS(load_csv(dir / "n.csv"), doctest::Contains(":2"), Error);

    support::write_file(dir / "e.csv", "");
    CHECK_THROWS_AS(load_csv(dir / "e.csv"), Error);
}

TEST_CASE("load_csv with header, named label column and quoted fields") {
    support::TempDir dir;
    std::string text = "cls,f1,f2\n";
    for (int i = 0; i < 20; ++i) text += (i % 2 ? "\"x, y\"," : "z,") + std::to_string(i) + "," + std::to_string(2 * i) + "\n";
    support::write_file(dir / "h.csv", text);
    CsvOptions opts;
    opts.has_header = true;
    opts.label_column = std::string("cls");
    const Dataset ds = load_csv(dir / "h.csv", opts);
    CHECK(ds.size() == 20);
    CHECK(ds.feature_dim() == 2);
    CHECK(ds.class_names == std::vector<std::string>{"z", "x, y"});
    CHECK(ds.features(19, 1) == 38.0);

    opts.label_column = std::string("nope");
    CHECK_THROWS_AS(load_csv(dir / "h.csv", opts), Error);
}

TEST_CASE("write_csv round trips exactly") {
    support::TempDir dir;
    Dataset ds;
    ds.features = Matrix(3, 2);
    ds.features << 0.1, 1.0 / 3.0, -2e-300, 12345.678901234567, 7, 1e20;
    ds.labels = {0, 1, 0};
    ds.class_count = 2;
    ds.class_names = {"p", "q"};
    write_csv(ds, dir / "w.csv", false);
    const Dataset back = load_csv(dir / "w.csv");
    CHECK(back.features == ds.features);
    CHECK(back.labels == ds.labels);
    CHECK(back.class_names == ds.class_names);
}

TEST_CASE("normalize: minmax, constant zscore, moments and inversion") {
    Dataset ds;
    ds.features = Matrix(2, 1);
    ds.features << 0, 10;
    ds.labels = {0, 1};
    ds.class_count = 2;
    auto [mm, mm_stats] = normalize(ds, NormMode::minmax01);
    CHECK(mm.features(0, 0) == 0.0);
    CHECK(mm.features(1, 0) == 1.0);

    Dataset flat;
    flat.features = Matrix::Constant(3, 1, 5.0);
    flat.labels = {0, 1, 0};
    flat.class_count = 2;
    auto [z, z_stats] = normalize(flat, NormMode::zscore);
    CHECK(z.features.isZero(0.0));
    CHECK(z_stats.scales(0) == 1.0);

    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(4.0, 3.0);
    Dataset r;
    r.features = Matrix(200, 5);
    for (Eigen::Index i = 0; i < r.features.size(); ++i) r.features.data()[i] = g(rng);
    r.labels.assign(200, 0);
    r.labels[0] = 1;
    r.class_count = 2;
    auto [rz, rz_stats] = normalize(r, NormMode::zscore);
    for (Eigen::Index j = 0; j < 5; ++j) {
        const double mean = rz.features.col(j).mean();
        const double var = (rz.features.col(j).array() - mean).square().mean();
        CHECK(std::abs(mean) <= 1e-12);
        CHECK(std::abs(var - 1.0) <= 1e-9);
    }
    CHECK((rz_stats.invert(rz.features) - r.features).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((rz_stats.apply(r.features) - rz.features).cwiseAbs().maxCoeff() == 0.0);
    CHECK(parse_norm_mode(to_string(NormMode::minmax01)) == NormMode::minmax01);
    CHECK_THROWS_AS(parse_norm_mode("l2"), Error);
}

namespace {

Dataset labels_only(const std::vector<std::size_t>& sizes) {
    Dataset ds;
    for (std::size_t c = 0; c < sizes.size(); ++c) ds.labels.insert(ds.labels.end(), sizes[c], static_cast<int>(c));
    ds.features = Matrix::Zero(static_cast<Eigen::Index>(ds.labels.size()), 1);
    ds.class_count = static_cast<int>(sizes.size());
    return ds;
}

} // namespace

TEST_CASE("stratified_split holds out per class, deterministically") {
    const Dataset ds = labels_only(std::vector<std::size_t>(10, 10));
    const Split a = stratified_split(ds, 0.1, 42);
    const Split b = stratified_split(ds, 0.1, 42);
    CHECK(a.validation.size() == 10);
    CHECK(a.train.size() == 90);
    CHECK(a.train == b.train);
    CHECK(a.validation == b.validation);
    std::vector<int> per_class(10, 0);
    for (auto i : a.validation) ++per_class[static_cast<std::size_t>(ds.labels[i])];
    CHECK(per_class == std::vector<int>(10, 1));

    std::set<std::size_t> all(a.train.begin(), a.train.end());
    all.insert(a.validation.begin(), a.validation.end());
    CHECK(all.size() == 100);

    const Split c = stratified_split(ds, 0.1, 43);
    CHECK(c.validation != a.validation);
}

TEST_CASE("stratified_split on MNIST class counts gives 6000 validation points") {
    const Dataset ds = labels_only({5923, 6742, 5958, 6131, 5842, 5421, 5918, 6265, 5851, 5949});
    CHECK(ds.size() == 60000);
    const Split s = stratified_split(ds, 0.1, 1);
    CHECK(s.validation.size() == 6000);
}

TEST_CASE("stratified_split rejects singleton classes and bad fractions") {
    CHECK_THROWS_AS(stratified_split(labels_only({5, 1}), 0.1, 0), Error);
    CHECK_THROWS_AS(stratified_split(labels_only({5, 5}), 1.5, 0), Error);
}

TEST_CASE("Dataset::validate catches broken invariants") {
    Dataset ds = labels_only({2, 2});
    CHECK_NOTHROW(ds.validate());
    ds.labels[0] = 7;
    CHECK_THROWS_AS(ds.validate(), Error);
    ds = labels_only({2, 2});
    ds.features(1, 0) = std::nan("");
    CHECK_THROWS_AS(ds.validate(), Error);
}
