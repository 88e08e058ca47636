#pragma once

#include "enhope/embedding.hpp"
#include "enhope/kernels.hpp"

#include <cstdint>

namespace enhope {

struct PairwiseLossConfig {
    PairKernel kernel = PairKernel::student_t;
    bool want_gradient = true;
};

/// Exemplar vectors in input space with their designated classes.
struct ExemplarLossState {
    Matrix exemplars;  ///< z x H
    Labels labels;     ///< length z
    bool trainable = false;

    std::size_t size() const { return labels.size(); }
};

struct ExemplarLossConfig {
    ExemplarNormalization normalization = ExemplarNormalization::global;
    bool want_gradient = true;
};

struct LossValue {
    double loss = 0.0;
    Vector grad_params;     ///< layout of EmbeddingModel::flatten(); empty if no gradient requested
    Matrix grad_exemplars;  ///< z x H; zero when exemplars are frozen
    std::uint64_t distance_evaluations = 0;
};

/// Row-stochastic class-match targets: row i is uniform over the columns
/// sharing its label (excluding column i itself when `exclude_diagonal`).
Matrix target_probs(const Labels& row_labels, const Labels& col_labels, bool exclude_diagonal);

/// Collapsing-classes loss over all ordered pairs of X.
LossValue pairwise_loss(const EmbeddingModel& model, const Matrix& X, const Labels& labels,
                        const PairwiseLossConfig& cfg = {}, Backend backend = Backend::parallel);

/// Collapsing-classes loss comparing every point only against the exemplars.
/// Cost is linear in the number of points.
LossValue exemplar_loss(const EmbeddingModel& model, const Matrix& X, const Labels& labels,
                        const ExemplarLossState& state, const ExemplarLossConfig& cfg = {},
                        Backend backend = Backend::parallel);

/// `exemplar_loss` evaluated on the rows listed in `batch` alone; the
/// normalization pool is the batch, not the full dataset.
LossValue minibatch_loss(const EmbeddingModel& model, const Matrix& X, const Labels& labels,
                         const ExemplarLossState& state, const std::vector<std::size_t>& batch,
                         const ExemplarLossConfig& cfg = {}, Backend backend = Backend::parallel);

} // namespace enhope
