#include "enhope/embedding.hpp"

#include "enhope/error.hpp"

#include <omp.h>

#include <cmath>
#include <random>
#include <string>

namespace enhope {

namespace {

using Index = Eigen::Index;

constexpr Index kReductionSlots = 16;

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double ipow(double t, int order) {
    double r = 1.0;
    for (int i = 0; i < order; ++i) r *= t;
    return r;
}

void check_rows(const EmbeddingModel& model, const Matrix& X) {
    if (static_cast<std::size_t>(X.cols()) != model.input_dim()) {
        throw Error(ErrorKind::dimension, "embedding expects inputs of dimension " +
                                              std::to_string(model.input_dim()) + ", got " +
                                              std::to_string(X.cols()));
    }
}

void check_upstream(const EmbeddingModel& model, const Matrix& X, const Matrix& upstream) {
    check_rows(model, X);
    if (upstream.rows() != X.rows() || static_cast<std::size_t>(upstream.cols()) != model.output_dim()) {
        throw Error(ErrorKind::dimension, "upstream gradient shape does not match embedding output");
    }
}

// --- high-order pieces, each applied to a contiguous block of rows

template <class Rows>
Matrix factor_block(const HighOrderParams& p, const Rows& X) {
    const Index H = X.cols();
    Matrix T = X * p.C.topRows(H);
    T.rowwise() += p.C.row(H);
    return T;
}

Matrix powered(const Matrix& T, int order) {
    return T.unaryExpr([order](double t) { return ipow(t, order); });
}

Matrix activation_block(const HighOrderParams& p, const Matrix& T) {
    Matrix Z = powered(T, p.order) * p.W;
    Z.rowwise() += p.b.transpose();
    return Z.unaryExpr([](double z) { return sigmoid(z); });
}

/// d loss / d t given d loss / d y for a block of rows.
Matrix factor_grad(const HighOrderParams& p, const Matrix& T, const Matrix& A, const Matrix& G,
                   Matrix* dZ_out = nullptr) {
    Matrix dA = G * p.V;
    Matrix dZ = dA.cwiseProduct(A.cwiseProduct((1.0 - A.array()).matrix()));
    Matrix dT = (dZ * p.W.transpose()).cwiseProduct(
        T.unaryExpr([o = p.order](double t) { return o * ipow(t, o - 1); }));
    if (dZ_out) *dZ_out = std::move(dZ);
    return dT;
}

struct HighOrderGrad {
    Matrix dC, dW, dV;
    Vector db;

    explicit HighOrderGrad(const HighOrderParams& p)
        : dC(Matrix::Zero(p.C.rows(), p.C.cols())),
          dW(Matrix::Zero(p.W.rows(), p.W.cols())),
          dV(Matrix::Zero(p.V.rows(), p.V.cols())),
          db(Vector::Zero(p.b.size())) {}

    template <class Rows>
    void accumulate(const HighOrderParams& p, const Rows& X, const Matrix& T, const Matrix& A, const Matrix& G) {
        const Index H = X.cols();
        Matrix dZ;
        Matrix dT = factor_grad(p, T, A, G, &dZ);
        dV.noalias() += G.transpose() * A;
        db += dZ.colwise().sum().transpose();
        dW.noalias() += powered(T, p.order).transpose() * dZ;
        dC.topRows(H).noalias() += X.transpose() * dT;
        dC.row(H) += dT.colwise().sum();
    }

    void add(const HighOrderGrad& other) {
        dC += other.dC;
        dW += other.dW;
        dV += other.dV;
        db += other.db;
    }

    Vector flatten() const {
        Vector out(dC.size() + dW.size() + db.size() + dV.size());
        Index o = 0;
        out.segment(o, dC.size()) = Eigen::Map<const Vector>(dC.data(), dC.size());
        o += dC.size();
        out.segment(o, dW.size()) = Eigen::Map<const Vector>(dW.data(), dW.size());
        o += dW.size();
        out.segment(o, db.size()) = db;
        o += db.size();
        out.segment(o, dV.size()) = Eigen::Map<const Vector>(dV.data(), dV.size());
        return out;
    }
};

template <class Fn>
void for_each_chunk(Index rows, Backend backend, Fn&& fn) {
    const auto chunks = static_cast<Index>(parallel::chunk_count(static_cast<std::size_t>(rows)));
    const auto step = static_cast<Index>(parallel::kChunkRows);
    if (backend == Backend::serial) {
        fn(Index{0}, rows, Index{0});
        return;
    }
#pragma omp parallel for schedule(static) num_threads(parallel::thread_count())
    for (Index c = 0; c < chunks; ++c) {
        const Index begin = c * step;
        fn(begin, std::min(step, rows - begin), c);
    }
}

} // namespace

// ---------------------------------------------------------------- model

std::size_t EmbeddingModel::input_dim() const {
    if (variant() == Variant::high_order) return high_order().input_dim();
    return static_cast<std::size_t>(linear().A.cols());
}

std::size_t EmbeddingModel::output_dim() const {
    if (variant() == Variant::high_order) return high_order().output_dim();
    return static_cast<std::size_t>(linear().A.rows());
}

std::size_t EmbeddingModel::param_count() const {
    if (variant() == Variant::high_order) {
        const auto& p = high_order();
        return static_cast<std::size_t>(p.C.size() + p.W.size() + p.b.size() + p.V.size());
    }
    return static_cast<std::size_t>(linear().A.size());
}

Vector EmbeddingModel::flatten() const {
    if (variant() == Variant::linear) {
        const auto& A = linear().A;
        return Eigen::Map<const Vector>(A.data(), A.size());
    }
    const auto& p = high_order();
    Vector out(static_cast<Index>(param_count()));
    Index o = 0;
    out.segment(o, p.C.size()) = Eigen::Map<const Vector>(p.C.data(), p.C.size());
    o += p.C.size();
    out.segment(o, p.W.size()) = Eigen::Map<const Vector>(p.W.data(), p.W.size());
    o += p.W.size();
    out.segment(o, p.b.size()) = p.b;
    o += p.b.size();
    out.segment(o, p.V.size()) = Eigen::Map<const Vector>(p.V.data(), p.V.size());
    return out;
}

void EmbeddingModel::assign(const Eigen::Ref<const Vector>& flat) {
    if (static_cast<std::size_t>(flat.size()) != param_count()) {
        throw Error(ErrorKind::dimension, "flat parameter vector has wrong length");
    }
    if (variant() == Variant::linear) {
        auto& A = std::get<LinearParams>(params).A;
        Eigen::Map<Vector>(A.data(), A.size()) = flat;
        return;
    }
    auto& p = std::get<HighOrderParams>(params);
    Index o = 0;
    Eigen::Map<Vector>(p.C.data(), p.C.size()) = flat.segment(o, p.C.size());
    o += p.C.size();
    Eigen::Map<Vector>(p.W.data(), p.W.size()) = flat.segment(o, p.W.size());
    o += p.W.size();
    p.b = flat.segment(o, p.b.size());
    o += p.b.size();
    Eigen::Map<Vector>(p.V.data(), p.V.size()) = flat.segment(o, p.V.size());
}

void EmbeddingModel::validate() const {
    if (variant() == Variant::high_order) {
        const auto& p = high_order();
        if (p.order < 1) throw Error(ErrorKind::config, "interaction order must be >= 1");
        if (p.C.rows() < 2 || p.C.cols() < 1) throw Error(ErrorKind::dimension, "factor matrix is empty");
        if (p.W.rows() != p.C.cols() || p.b.size() != p.W.cols() || p.V.cols() != p.W.cols() || p.V.rows() < 1) {
            throw Error(ErrorKind::dimension, "inconsistent high-order parameter shapes");
        }
        if (!p.C.allFinite() || !p.W.allFinite() || !p.b.allFinite() || !p.V.allFinite()) {
            throw Error(ErrorKind::numeric, "non-finite embedding parameter");
        }
    } else {
        const auto& A = linear().A;
        if (A.rows() < 1 || A.cols() < 1) throw Error(ErrorKind::dimension, "linear map is empty");
        if (!A.allFinite()) throw Error(ErrorKind::numeric, "non-finite embedding parameter");
    }
    if (output_dim() >= input_dim()) {
        throw Error(ErrorKind::config, "embedding dimension must be smaller than input dimension");
    }
    if (static_cast<std::size_t>(norm.offsets.size()) != input_dim() ||
        static_cast<std::size_t>(norm.scales.size()) != input_dim()) {
        throw Error(ErrorKind::dimension, "normalization statistics do not match input dimension");
    }
}

namespace {

Matrix uniform_matrix(Index rows, Index cols, std::mt19937_64& rng) {
    const double r = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-r, r);
    Matrix M(rows, cols);
    for (Index i = 0; i < M.size(); ++i) M.data()[i] = dist(rng);
    return M;
}

} // namespace

EmbeddingModel init_high_order(const EmbeddingDims& dims, int order, std::uint64_t seed) {
    if (dims.input < 1 || dims.output < 1 || dims.factors < 1 || dims.hidden < 1) {
        throw Error(ErrorKind::config, "embedding dimensions must be positive");
    }
    if (order < 1) throw Error(ErrorKind::config, "interaction order must be >= 1");
    std::mt19937_64 rng(seed);
    HighOrderParams p;
    const auto H = static_cast<Index>(dims.input);
    const auto F = static_cast<Index>(dims.factors);
    const auto m = static_cast<Index>(dims.hidden);
    const auto h = static_cast<Index>(dims.output);
    p.C = uniform_matrix(H + 1, F, rng);
    p.W = uniform_matrix(F, m, rng);
    p.b = Vector::Zero(m);
    p.V = uniform_matrix(h, m, rng);
    p.order = order;
    EmbeddingModel model{std::move(p), NormStats::identity(dims.input)};
    model.validate();
    return model;
}

EmbeddingModel init_linear(std::size_t input_dim, std::size_t output_dim, std::uint64_t seed) {
    if (input_dim < 1 || output_dim < 1) throw Error(ErrorKind::config, "embedding dimensions must be positive");
    std::mt19937_64 rng(seed);
    EmbeddingModel model{LinearParams{uniform_matrix(static_cast<Index>(output_dim), static_cast<Index>(input_dim), rng)},
                         NormStats::identity(input_dim)};
    model.validate();
    return model;
}

// ---------------------------------------------------------------- passes

Matrix forward(const EmbeddingModel& model, const Matrix& X, ForwardCache& cache, Backend backend) {
    check_rows(model, X);
    if (model.variant() == Variant::linear) {
        cache = {};
        return X * model.linear().A.transpose();
    }
    const auto& p = model.high_order();
    const Index n = X.rows();
    Matrix Y(n, static_cast<Index>(p.output_dim()));
    cache.factors.resize(n, static_cast<Index>(p.factors()));
    cache.activations.resize(n, static_cast<Index>(p.hidden()));
    for_each_chunk(n, backend, [&](Index begin, Index len, Index) {
        auto rows = X.middleRows(begin, len);
        Matrix T = factor_block(p, rows);
        Matrix A = activation_block(p, T);
        Y.middleRows(begin, len).noalias() = A * p.V.transpose();
        cache.factors.middleRows(begin, len) = T;
        cache.activations.middleRows(begin, len) = A;
    });
    return Y;
}

Matrix forward(const EmbeddingModel& model, const Matrix& X, Backend backend) {
    check_rows(model, X);
    if (model.variant() == Variant::linear) return X * model.linear().A.transpose();
    const auto& p = model.high_order();
    const Index n = X.rows();
    Matrix Y(n, static_cast<Index>(p.output_dim()));
    for_each_chunk(n, backend, [&](Index begin, Index len, Index) {
        Matrix T = factor_block(p, X.middleRows(begin, len));
        Y.middleRows(begin, len).noalias() = activation_block(p, T) * p.V.transpose();
    });
    return Y;
}

Vector backward_params(const EmbeddingModel& model, const Matrix& X, const Matrix& upstream, Backend backend,
                       const ForwardCache* cache) {
    check_upstream(model, X, upstream);
    if (model.variant() == Variant::linear) {
        Matrix dA = upstream.transpose() * X;
        return Eigen::Map<const Vector>(dA.data(), dA.size());
    }
    const auto& p = model.high_order();
    const Index n = X.rows();
    const bool cached = cache && cache->factors.rows() == n && cache->activations.rows() == n;

    auto block_terms = [&](Index begin, Index len, Matrix& T, Matrix& A) {
        if (cached) {
            T = cache->factors.middleRows(begin, len);
            A = cache->activations.middleRows(begin, len);
        } else {
            T = factor_block(p, X.middleRows(begin, len));
            A = activation_block(p, T);
        }
    };

    if (backend == Backend::serial) {
        HighOrderGrad grad(p);
        Matrix T, A;
        block_terms(0, n, T, A);
        grad.accumulate(p, X, T, A, upstream);
        return grad.flatten();
    }

    // Fixed slot layout: slot s owns a contiguous run of chunks and walks them
    // in order, so the reduction order never depends on the thread count.
    const auto chunks = static_cast<Index>(parallel::chunk_count(static_cast<std::size_t>(n)));
    const Index slots = std::max<Index>(1, std::min<Index>(chunks, kReductionSlots));
    const auto step = static_cast<Index>(parallel::kChunkRows);
    std::vector<HighOrderGrad> partials(static_cast<std::size_t>(slots), HighOrderGrad(p));
#pragma omp parallel for schedule(static, 1) num_threads(parallel::thread_count())
    for (Index s = 0; s < slots; ++s) {
        const Index first = s * chunks / slots;
        const Index last = (s + 1) * chunks / slots;
        for (Index c = first; c < last; ++c) {
            const Index begin = c * step;
            const Index len = std::min(step, n - begin);
            Matrix T, A;
            block_terms(begin, len, T, A);
            Matrix G = upstream.middleRows(begin, len);
            partials[static_cast<std::size_t>(s)].accumulate(p, X.middleRows(begin, len), T, A, G);
        }
    }
    for (std::size_t s = 1; s < partials.size(); ++s) partials.front().add(partials[s]);
    return partials.front().flatten();
}

Matrix backward_inputs(const EmbeddingModel& model, const Matrix& X, const Matrix& upstream, Backend backend) {
    check_upstream(model, X, upstream);
    if (model.variant() == Variant::linear) return upstream * model.linear().A;
    const auto& p = model.high_order();
    const Index n = X.rows();
    const Index H = X.cols();
    Matrix dX(n, H);
    for_each_chunk(n, backend, [&](Index begin, Index len, Index) {
        Matrix T = factor_block(p, X.middleRows(begin, len));
        Matrix A = activation_block(p, T);
        Matrix dT = factor_grad(p, T, A, upstream.middleRows(begin, len));
        // The constant input component has no gradient; drop the last row of C.
        dX.middleRows(begin, len).noalias() = dT * p.C.topRows(H).transpose();
    });
    return dX;
}

Vector backward_input(const EmbeddingModel& model, const Vector& x, const Vector& upstream) {
    if (static_cast<std::size_t>(upstream.size()) != model.output_dim()) {
        throw Error(ErrorKind::dimension, "upstream gradient has wrong length");
    }
    Matrix X = x.transpose();
    Matrix G = upstream.transpose();
    return backward_inputs(model, X, G, Backend::serial).row(0).transpose();
}

} // namespace enhope
