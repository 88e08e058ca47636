#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "enhope/error.hpp"
#include "enhope/knn.hpp"
#include "enhope/model_file.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace enhope;

namespace {

ModelFile sample_file(std::mt19937_64& rng, bool linear, std::size_t z) {
    ModelFile f;
    f.model = linear ? init_linear(5, 2, rng()) : init_high_order({5, 2, 4, 3}, 3, rng());
    Vector theta = f.model.flatten();
    theta += oracle::random_matrix(rng, theta.size(), 1).col(0);
    f.model.assign(theta);
    f.model.norm.mode = NormMode::zscore;
    f.model.norm.offsets = oracle::random_matrix(rng, 5, 1).col(0);
    f.model.norm.scales = Vector::Constant(5, 2.5);
    f.exemplars.vectors = oracle::random_matrix(rng, static_cast<Eigen::Index>(z), 5);
    for (std::size_t j = 0; j < z; ++j) f.exemplars.labels.push_back(static_cast<int>(j % 3));
    f.class_count = 3;
    f.class_names = {"cat", "dog", "x y"};
    f.seed = 0xfeedfacecafebeefULL;
    f.epochs = 17;
    f.selected_epoch = 12;
    f.final_val_error = 0.0625;
    f.exemplar_mode = z ? ExemplarMode::learned_init_random : ExemplarMode::none;
    return f;
}

} // namespace

TEST_CASE("encode/decode round trips byte-identically") {
    std::mt19937_64 rng(1);
    for (bool linear : {false, true}) {
        for (std::size_t z : {0u, 4u}) {
            const ModelFile f = sample_file(rng, linear, z);
            const auto bytes = encode_model(f);
            const ModelFile g = decode_model(bytes);
            CHECK(encode_model(g) == bytes);
            CHECK(g.model.flatten() == f.model.flatten());
            CHECK(g.exemplars.vectors == f.exemplars.vectors);
            CHECK(g.exemplars.labels == f.exemplars.labels);
            CHECK(g.class_names == f.class_names);
            CHECK(g.seed == f.seed);
            CHECK(g.epochs == 17);
            CHECK(g.selected_epoch == 12);
            CHECK(g.exemplar_mode == f.exemplar_mode);
            CHECK(g.model.variant() == f.model.variant());
        }
    }
}

TEST_CASE("header layout") {
    std::mt19937_64 rng(2);
    const auto bytes = encode_model(sample_file(rng, false, 4));
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "ENHP");
    auto u32 = [&](std::size_t off) {
        return std::uint32_t{bytes[off]} | std::uint32_t{bytes[off + 1]} << 8 | std::uint32_t{bytes[off + 2]} << 16 |
               std::uint32_t{bytes[off + 3]} << 24;
    };
    CHECK(u32(4) == kModelFormatVersion);
    CHECK(u32(8) == 0);   // high-order
    CHECK(u32(12) == 5);  // H
    CHECK(u32(16) == 2);  // h
    CHECK(u32(20) == 4);  // F
    CHECK(u32(24) == 3);  // m
    CHECK(u32(28) == 3);  // O
    CHECK(u32(32) == 4);  // z
    CHECK(u32(36) == 3);  // c
}

TEST_CASE("save/load preserves predictions and NaN metadata") {
    std::mt19937_64 rng(3);
    support::TempDir dir;
    ModelFile f = sample_file(rng, false, 6);
    f.final_val_error = std::numeric_limits<double>::quiet_NaN();
    save_model(f, dir / "m.enhp");
    const ModelFile g = load_model(dir / "m.enhp");
    CHECK(std::isnan(g.final_val_error));
    const auto raw = support::read_file(dir / "m.enhp");
    save_model(g, dir / "n.enhp");
    CHECK(support::read_file(dir / "n.enhp") == raw);

    Dataset test;
    test.features = oracle::random_matrix(rng, 40, 5);
    test.labels = oracle::random_labels(rng, 40, 3);
    test.class_count = 3;
    CHECK(classify_with_model(f.model, f.exemplars, test, 1).predictions ==
          classify_with_model(g.model, g.exemplars, test, 1).predictions);
}

TEST_CASE("corrupt files are rejected with format errors") {
    std::mt19937_64 rng(4);
    const auto bytes = encode_model(sample_file(rng, false, 2));
    auto expect_format = [](std::vector<std::uint8_t> b, const char* needle) {
        try {
            decode_model(b);
            FAIL("decode should fail");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::format);
            INFO(std::string(e.what()));
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    expect_format({bytes.begin(), bytes.begin() + 50}, "truncated");
    auto bad = bytes;
    bad[0] = 'X';
    expect_format(bad, "magic");
    bad = bytes;
    bad[4] = 9;
    expect_format(bad, "version");
    bad = bytes;
    bad.push_back(0);
    expect_format(bad, "trailing");
    bad = bytes;
    bad[12] = 0xff;
    bad[13] = 0xff;
    bad[14] = 0xff;
    bad[15] = 0x01;
    expect_format(bad, "implausible");

    support::TempDir dir;
    CHECK_THROWS_AS(load_model(dir / "none.enhp"), Error);
}
