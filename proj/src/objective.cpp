#include "enhope/objective.hpp"

#include "enhope/error.hpp"

#include <string>

namespace enhope {

Matrix target_probs(const Labels& row_labels, const Labels& col_labels, bool exclude_diagonal) {
    const auto n = static_cast<Eigen::Index>(row_labels.size());
    const auto p = static_cast<Eigen::Index>(col_labels.size());
    Matrix P = Matrix::Zero(n, p);
    for (Eigen::Index i = 0; i < n; ++i) {
        double count = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (exclude_diagonal && i == j) continue;
            if (row_labels[static_cast<std::size_t>(i)] == col_labels[static_cast<std::size_t>(j)]) {
                P(i, j) = 1.0;
                count += 1.0;
            }
        }
        if (count == 0.0) {
            throw Error(ErrorKind::data, "row " + std::to_string(i) + " (class " +
                                             std::to_string(row_labels[static_cast<std::size_t>(i)]) +
                                             ") has no same-class target: isolated class instance");
        }
        P.row(i) /= count;
    }
    return P;
}

LossValue pairwise_loss(const EmbeddingModel& model, const Matrix& X, const Labels& labels,
                        const PairwiseLossConfig& cfg, Backend backend) {
    ForwardCache cache;
    Matrix Y = forward(model, X, cache, backend);
    PairTerms terms = kernels::pairwise_terms(Y, labels, cfg.kernel, backend);
    LossValue out;
    out.loss = terms.loss;
    out.distance_evaluations = terms.distance_evaluations;
    if (cfg.want_gradient) out.grad_params = backward_params(model, X, terms.grad_y, backend, &cache);
    return out;
}

LossValue exemplar_loss(const EmbeddingModel& model, const Matrix& X, const Labels& labels,
                        const ExemplarLossState& state, const ExemplarLossConfig& cfg, Backend backend) {
    if (state.exemplars.rows() != static_cast<Eigen::Index>(state.labels.size())) {
        throw Error(ErrorKind::dimension, "exemplar matrix and exemplar labels disagree");
    }
    ForwardCache data_cache, exemplar_cache;
    Matrix Y = forward(model, X, data_cache, backend);
    Matrix Ye = forward(model, state.exemplars, exemplar_cache, backend);
    ExemplarTerms terms = kernels::exemplar_terms(Y, labels, Ye, state.labels, cfg.normalization, backend);

    LossValue out;
    out.loss = terms.loss;
    out.distance_evaluations = terms.distance_evaluations;
    if (!cfg.want_gradient) return out;

    // Parameters act on both ends of every data/exemplar distance.
    out.grad_params = backward_params(model, X, terms.grad_y, backend, &data_cache);
    out.grad_params += backward_params(model, state.exemplars, terms.grad_exemplar_y, backend, &exemplar_cache);
    if (state.trainable) {
        out.grad_exemplars = backward_inputs(model, state.exemplars, terms.grad_exemplar_y, backend);
    } else {
        out.grad_exemplars = Matrix::Zero(state.exemplars.rows(), state.exemplars.cols());
    }
    return out;
}

LossValue minibatch_loss(const EmbeddingModel& model, const Matrix& X, const Labels& labels,
                         const ExemplarLossState& state, const std::vector<std::size_t>& batch,
                         const ExemplarLossConfig& cfg, Backend backend) {
    if (batch.empty()) throw Error(ErrorKind::data, "empty minibatch");
    for (auto r : batch) {
        if (r >= labels.size()) throw Error(ErrorKind::dimension, "minibatch index out of range");
    }
    return exemplar_loss(model, gather_rows(X, batch), gather_labels(labels, batch), state, cfg, backend);
}

} // namespace enhope
