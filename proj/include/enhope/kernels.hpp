#pragma once

#include "enhope/matrix.hpp"
#include "enhope/parallel.hpp"

#include <cstdint>

namespace enhope {

/// Neighbor density for the pairwise objective.
enum class PairKernel : std::uint32_t {
    gaussian = 0,   ///< q_{j|i} = exp(-d_ij) / sum_{k != i} exp(-d_ik)
    student_t = 1,  ///< q_ij = (1+d_ij)^-1 / sum_{k != l} (1+d_kl)^-1
};

/// Normalization pool for data-to-exemplar Student-t probabilities.
enum class ExemplarNormalization : std::uint32_t {
    global = 0,   ///< over all n*z data/exemplar pairs
    per_row = 1,  ///< over the z exemplars of each data point
};

/// Loss and its gradient with respect to the embedded points.
struct PairTerms {
    double loss = 0.0;
    Matrix grad_y;
    std::uint64_t distance_evaluations = 0;
};

struct ExemplarTerms {
    double loss = 0.0;
    Matrix grad_y;           ///< n x h
    Matrix grad_exemplar_y;  ///< z x h
    std::uint64_t distance_evaluations = 0;
};

namespace kernels {

/// -sum_{i != j} [L_i = L_j] log q_{j|i} on embedded points Y (n x h).
PairTerms pairwise_terms(const Matrix& Y, const Labels& labels, PairKernel kernel,
                         Backend backend = Backend::parallel);

/// -sum_i sum_j [L_i = L'_j] log q_{j|i} with q built from squared distances
/// between embedded data Y and embedded exemplars Ye only.
ExemplarTerms exemplar_terms(const Matrix& Y, const Labels& labels, const Matrix& Ye, const Labels& exemplar_labels,
                             ExemplarNormalization normalization, Backend backend = Backend::parallel);

/// Full q matrices, for diagnostics and tests (n x n, or n x z).
Matrix pairwise_probabilities(const Matrix& Y, PairKernel kernel);
Matrix exemplar_probabilities(const Matrix& Y, const Matrix& Ye, ExemplarNormalization normalization);

/// Exact kNN vote by squared Euclidean distance. Distance ties go to the
/// lower reference index; vote ties go to the class of the nearest voter.
Labels knn_vote(const Matrix& references, const Labels& reference_labels, const Matrix& queries, int k,
                Backend backend = Backend::parallel);

namespace serial {
PairTerms pairwise_terms(const Matrix& Y, const Labels& labels, PairKernel kernel);
ExemplarTerms exemplar_terms(const Matrix& Y, const Labels& labels, const Matrix& Ye, const Labels& exemplar_labels,
                             ExemplarNormalization normalization);
Labels knn_vote(const Matrix& references, const Labels& reference_labels, const Matrix& queries, int k);
} // namespace serial

namespace omp {
PairTerms pairwise_terms(const Matrix& Y, const Labels& labels, PairKernel kernel);
ExemplarTerms exemplar_terms(const Matrix& Y, const Labels& labels, const Matrix& Ye, const Labels& exemplar_labels,
                             ExemplarNormalization normalization);
Labels knn_vote(const Matrix& references, const Labels& reference_labels, const Matrix& queries, int k);
} // namespace omp

namespace detail {
/// Shared per-query kNN routine used by both backends.
int knn_vote_one(const Matrix& references, const Labels& reference_labels, const double* query, int k,
                 std::vector<std::pair<double, Eigen::Index>>& scratch);
void check_knn_inputs(const Matrix& references, const Labels& reference_labels, const Matrix& queries, int k);
void check_pair_inputs(const Matrix& Y, const Labels& labels);
void check_exemplar_inputs(const Matrix& Y, const Labels& labels, const Matrix& Ye, const Labels& exemplar_labels);
} // namespace detail

} // namespace kernels
} // namespace enhope
