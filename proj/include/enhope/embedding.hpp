#pragma once

#include "enhope/data.hpp"
#include "enhope/matrix.hpp"
#include "enhope/parallel.hpp"

#include <cstdint>
#include <variant>

namespace enhope {

/// Shallow high-order map
///
///   t_f = C_f' [x; 1],   a_k = sigmoid(sum_f W_fk t_f^O + b_k),   y = V a
///
/// With the constant 1 appended to x, the power t_f^O expands into every
/// monomial of the input features up to degree O.
struct HighOrderParams {
    Matrix C;  ///< (H+1) x F; the last row multiplies the constant input.
    Matrix W;  ///< F x m
    Vector b;  ///< m
    Matrix V;  ///< h x m
    int order = 2;

    std::size_t input_dim() const { return static_cast<std::size_t>(C.rows()) - 1; }
    std::size_t factors() const { return static_cast<std::size_t>(C.cols()); }
    std::size_t hidden() const { return static_cast<std::size_t>(W.cols()); }
    std::size_t output_dim() const { return static_cast<std::size_t>(V.rows()); }
};

/// y = A x
struct LinearParams {
    Matrix A;  ///< h x H
};

enum class Variant : std::uint32_t { high_order = 0, linear = 1 };

struct EmbeddingDims {
    std::size_t input = 0;    ///< H
    std::size_t output = 2;   ///< h
    std::size_t factors = 800;
    std::size_t hidden = 400;
};

/// An embedding map together with the input normalization it was trained
/// under. `forward` and friends take inputs that are already normalized.
struct EmbeddingModel {
    std::variant<HighOrderParams, LinearParams> params;
    NormStats norm;

    Variant variant() const {
        return std::holds_alternative<HighOrderParams>(params) ? Variant::high_order : Variant::linear;
    }
    const HighOrderParams& high_order() const { return std::get<HighOrderParams>(params); }
    const LinearParams& linear() const { return std::get<LinearParams>(params); }

    std::size_t input_dim() const;
    std::size_t output_dim() const;

    /// Length of the flat parameter vector: C, W, b, V (each row-major) or A.
    std::size_t param_count() const;
    Vector flatten() const;
    void assign(const Eigen::Ref<const Vector>& flat);

    void validate() const;
};

EmbeddingModel init_high_order(const EmbeddingDims& dims, int order, std::uint64_t seed);
EmbeddingModel init_linear(std::size_t input_dim, std::size_t output_dim, std::uint64_t seed);

/// Intermediate activations kept from a forward pass for reuse in backward.
struct ForwardCache {
    Matrix factors;     ///< n x F, t = C' x'
    Matrix activations; ///< n x m, sigmoid outputs
};

Matrix forward(const EmbeddingModel& model, const Matrix& X, Backend backend = Backend::parallel);
Matrix forward(const EmbeddingModel& model, const Matrix& X, ForwardCache& cache,
               Backend backend = Backend::parallel);

/// Gradient of sum_i <upstream_i, f(x_i)> with respect to the flat parameter
/// vector. Pass the cache filled by `forward` on the same X to skip recomputation.
Vector backward_params(const EmbeddingModel& model, const Matrix& X, const Matrix& upstream,
                       Backend backend = Backend::parallel, const ForwardCache* cache = nullptr);

/// J(x)' * upstream, the pull-back of an output gradient to the input.
Vector backward_input(const EmbeddingModel& model, const Vector& x, const Vector& upstream);

/// Row-wise `backward_input` for a batch.
Matrix backward_inputs(const EmbeddingModel& model, const Matrix& X, const Matrix& upstream,
                       Backend backend = Backend::parallel);

} // namespace enhope
