#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "enhope/error.hpp"
#include "enhope/knn.hpp"
#include "enhope/optimizer.hpp"
#include "oracles.hpp"

using namespace enhope;

namespace {

struct Quadratic {
    Matrix A;
    Vector b;

    double operator()(const Vector& x, Vector* grad) const {
        const Vector Ax = A * x;
        if (grad) *grad = Ax - b;
        return 0.5 * x.dot(Ax) - b.dot(x);
    }
};

Quadratic random_quadratic(std::mt19937_64& rng, Eigen::Index dim) {
    const Matrix M = oracle::random_matrix(rng, dim, dim);
    return {M.transpose() * M + Matrix::Identity(dim, dim), oracle::random_matrix(rng, dim, 1).col(0)};
}

Dataset blob_data(std::mt19937_64& rng, std::size_t per_class, int classes, Eigen::Index dim, double sep) {
    Dataset ds;
    ds.features = oracle::random_matrix(rng, static_cast<Eigen::Index>(per_class) * classes, dim);
    for (int c = 0; c < classes; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            ds.features(static_cast<Eigen::Index>(ds.labels.size()), c % dim) += sep;
            ds.labels.push_back(c);
        }
    }
    ds.class_count = classes;
    return ds;
}

} // namespace

TEST_CASE("CG solves quadratics within dim + 5 iterations") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 5; ++trial) {
        const Eigen::Index dim = 10;
        const Quadratic q = random_quadratic(rng, dim);
        Vector x = Vector::Zero(dim);
        CgConfig cfg;
        const auto result = minimize(std::cref(q), x, cfg, static_cast<int>(dim) + 5, 1e-8);
        CHECK(result.grad_norm <= 1e-8);
        CHECK(result.iterations <= dim + 5);
    }
}

TEST_CASE("every accepted step satisfies the Armijo condition") {
    std::mt19937_64 rng(2);
    auto rosenbrock = [](const Vector& x, Vector* g) {
        double f = 0.0;
        if (g) g->setZero(x.size());
        for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
            const double a = x(i + 1) - x(i) * x(i), b = 1 - x(i);
            f += 100 * a * a + b * b;
            if (g) {
                (*g)(i) += -400 * a * x(i) - 2 * b;
                (*g)(i + 1) += 200 * a;
            }
        }
        return f;
    };
    CgConfig cfg;
    std::size_t steps = 0;
    cfg.on_step = [&](const StepRecord& r) {
        ++steps;
        CHECK(r.slope < 0.0);
        if (!r.fallback) CHECK(r.f_after <= r.f_before + cfg.armijo_c1 * r.alpha * r.slope);
        CHECK(r.f_after <= r.f_before);
    };
    Vector x = Vector::Constant(6, -1.2);
    const auto result = minimize(rosenbrock, x, cfg, 2000, 1e-10);
    CHECK(steps == static_cast<std::size_t>(result.iterations));
    CHECK((x.array() - 1.0).abs().maxCoeff() <= 1e-4);
}

TEST_CASE("a non-finite trial point is backtracked, not accepted") {
    auto f = [](const Vector& x, Vector* g) {
        if (x(0) > 1.0) return std::numeric_limits<double>::infinity();
        if (g) *g = Vector::Constant(1, -1.0 / (1.0 - x(0) + 1e-3));
        return std::log(1.0 - x(0) + 1e-3);
    };
    CgConfig cfg;
    Vector x = Vector::Zero(1);
    ConjugateGradient cg(cfg);
    for (int i = 0; i < 5; ++i) {
        const auto r = cg.step(f, x);
        CHECK(std::isfinite(r.f_after));
        CHECK(x(0) <= 1.0);
    }
}

TEST_CASE("config validation") {
    CgConfig cfg;
    cfg.armijo_c1 = 1.5;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.shrink = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.batch_size = 1;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("evaluate_validation examples") {
    EmbeddingModel model = init_linear(2, 1, 0);
    Matrix A(1, 2);
    A << 1, 0;
    model.params = LinearParams{A};
    Matrix refs(2, 2);
    refs << -5, 0, 5, 0;
    Matrix val(4, 2);
    val << -4, 1, -6, 2, 4, 3, 7, -1;
    CHECK(evaluate_validation(model, {refs, {0, 1}}, val, {0, 0, 1, 1}, 1) == 0.0);
    CHECK(evaluate_validation(model, {val, {0, 0, 1, 1}}, val, {0, 0, 1, 1}, 1) == 0.0);
    CHECK(std::isnan(evaluate_validation(model, {refs, {0, 1}}, Matrix(0, 2), {}, 1)));

    std::mt19937_64 rng(3);
    const Matrix R = oracle::random_matrix(rng, 200, 2);
    const Matrix V = oracle::random_matrix(rng, 2000, 2);
    const double err = evaluate_validation(model, {R, oracle::random_labels(rng, 200, 4)}, V, oracle::random_labels(rng, 2000, 4), 1);
    CHECK(std::abs(err - 0.75) <= 0.05);
}

TEST_CASE("single class collapses onto its exemplar") {
    std::mt19937_64 rng(4);
    Dataset ds;
    ds.features = oracle::random_matrix(rng, 12, 2);
    ds.labels.assign(12, 0);
    ds.class_count = 2;
    Split split;
    for (std::size_t i = 0; i < 12; ++i) split.train.push_back(i);
    ExemplarSet ex{ds.features.colwise().mean(), {0}};
    EmbeddingModel model = init_linear(2, 1, 5);

    CgConfig cfg;
    cfg.max_epochs = 400;
    const auto result = train(model, ds, split, ex, {LossMode::exemplar, false}, cfg);
    const Matrix Y = forward(result.model, ds.features);
    const Matrix Ye = forward(result.model, result.exemplars.vectors);
    CHECK((Y.array() - Ye(0, 0)).abs().maxCoeff() <= 1e-3);
}

TEST_CASE("full-batch training is monotone and bit-reproducible") {
    std::mt19937_64 rng(5);
    const Dataset ds = blob_data(rng, 30, 3, 5, 3.0);
    const Split split = stratified_split(ds, 0.2, 1);
    EmbeddingModel model = init_high_order({5, 2, 6, 4}, 2, 2);
    const ExemplarSet ex = make_exemplars(ds.subset(split.train), {3, ExemplarMode::kmeans, 3});

    CgConfig cfg;
    cfg.max_epochs = 8;
    std::vector<double> values;
    cfg.on_step = [&](const StepRecord& r) {
        CHECK(r.f_after <= r.f_before);
        values.push_back(r.f_after);
    };
    const auto a = train(model, ds, split, ex, {LossMode::exemplar, true}, cfg);
    const auto first = values;
    values.clear();
    const auto b = train(model, ds, split, ex, {LossMode::exemplar, true}, cfg);
    CHECK(first == values);
    REQUIRE(a.report.epochs.size() == b.report.epochs.size());
    for (std::size_t e = 0; e < a.report.epochs.size(); ++e) {
        CHECK(a.report.epochs[e].loss == b.report.epochs[e].loss);
        CHECK(a.report.epochs[e].val_error == b.report.epochs[e].val_error);
    }
    CHECK(a.model.flatten() == b.model.flatten());
    CHECK(a.exemplars.vectors == b.exemplars.vectors);
    CHECK(a.exemplars.vectors != ex.vectors);
    CHECK(a.report.batches_per_epoch == 1);
    CHECK(a.report.steps == 8u * 3u);

    // The returned snapshot has the lowest validation error.
    double best = 1.0;
    for (const auto& e : a.report.epochs) best = std::min(best, e.val_error);
    CHECK(a.report.epochs[static_cast<std::size_t>(a.report.selected_epoch - 1)].val_error == best);
}

TEST_CASE("minibatch, pairwise and patience paths") {
    std::mt19937_64 rng(6);
    const Dataset ds = blob_data(rng, 40, 2, 4, 4.0);
    const Split split = stratified_split(ds, 0.25, 2);
    EmbeddingModel model = init_high_order({4, 2, 5, 3}, 2, 7);
    const ExemplarSet ex = make_exemplars(ds.subset(split.train), {2, ExemplarMode::random, 3});

    CgConfig cfg;
    cfg.max_epochs = 4;
    cfg.batch_size = 16;
    const auto mb = train(model, ds, split, ex, {LossMode::exemplar, false}, cfg);
    CHECK(mb.report.batches_per_epoch == 4);
    CHECK(mb.exemplars.vectors == ex.vectors);
    for (const auto& e : mb.report.epochs) CHECK(std::isfinite(e.loss));

    cfg.batch_size = 5000;
    const auto pw = train(model, ds, split, {}, {LossMode::pairwise}, cfg);
    CHECK(pw.exemplars.size() == 0);
    CHECK(pw.report.epochs.size() == 4);
    CHECK(pw.report.epochs.back().val_error <= 0.1);

    cfg.max_epochs = 50;
    cfg.patience = 2;
    const auto early = train(model, ds, split, ex, {LossMode::exemplar, false}, cfg);
    CHECK(early.report.epochs.size() < 50);

    CHECK_THROWS_AS(train(model, ds, split, {}, {LossMode::exemplar}, cfg), Error);
    CHECK_THROWS_AS(train(model, ds, Split{}, ex, {LossMode::exemplar}, cfg), Error);
}
