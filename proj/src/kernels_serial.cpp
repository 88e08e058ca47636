// Single-threaded reference kernels. These are the straightforward loops the
// OpenMP versions in kernels_omp.cpp are checked against.

#include "enhope/error.hpp"
#include "enhope/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace enhope::kernels {

using Index = Eigen::Index;

namespace detail {

void check_pair_inputs(const Matrix& Y, const Labels& labels) {
    if (static_cast<std::size_t>(Y.rows()) != labels.size()) {
        throw Error(ErrorKind::dimension, "embedding rows and labels disagree");
    }
    if (Y.rows() < 2) throw Error(ErrorKind::data, "pairwise loss needs at least 2 points");
}

void check_exemplar_inputs(const Matrix& Y, const Labels& labels, const Matrix& Ye, const Labels& exemplar_labels) {
    if (static_cast<std::size_t>(Y.rows()) != labels.size() ||
        static_cast<std::size_t>(Ye.rows()) != exemplar_labels.size()) {
        throw Error(ErrorKind::dimension, "embedding rows and labels disagree");
    }
    if (Y.rows() < 1 || Ye.rows() < 1) throw Error(ErrorKind::data, "exemplar loss needs data and exemplars");
    if (Y.cols() != Ye.cols()) throw Error(ErrorKind::dimension, "data and exemplar embeddings differ in width");
    for (int label : labels) {
        if (std::find(exemplar_labels.begin(), exemplar_labels.end(), label) == exemplar_labels.end()) {
            throw Error(ErrorKind::data, "class " + std::to_string(label) + " is present in the data but has no exemplar");
        }
    }
}

void check_knn_inputs(const Matrix& references, const Labels& reference_labels, const Matrix& queries, int k) {
    if (static_cast<std::size_t>(references.rows()) != reference_labels.size()) {
        throw Error(ErrorKind::dimension, "reference rows and labels disagree");
    }
    if (k < 1) throw Error(ErrorKind::config, "k must be >= 1");
    if (k > references.rows()) {
        throw Error(ErrorKind::config, "k=" + std::to_string(k) + " exceeds the " +
                                           std::to_string(references.rows()) + " references");
    }
    if (queries.rows() > 0 && queries.cols() != references.cols()) {
        throw Error(ErrorKind::dimension, "query and reference dimensions differ");
    }
}

int knn_vote_one(const Matrix& references, const Labels& reference_labels, const double* query, int k,
                 std::vector<std::pair<double, Index>>& scratch) {
    const Index p = references.rows();
    const Index d = references.cols();
    Eigen::Map<const RowVector> q(query, d);
    scratch.resize(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) {
        scratch[static_cast<std::size_t>(j)] = {(references.row(j) - q).squaredNorm(), j};
    }
    // pair comparison orders by distance, then by reference index
    auto kth = scratch.begin() + k;
    std::partial_sort(scratch.begin(), kth, scratch.end());

    int best_label = reference_labels[static_cast<std::size_t>(scratch.front().second)];
    int best_votes = 0;
    for (int a = 0; a < k; ++a) {
        const int label = reference_labels[static_cast<std::size_t>(scratch[static_cast<std::size_t>(a)].second)];
        // count each label once, at its nearest occurrence
        bool seen = false;
        for (int b = 0; b < a && !seen; ++b) {
            seen = reference_labels[static_cast<std::size_t>(scratch[static_cast<std::size_t>(b)].second)] == label;
        }
        if (seen) continue;
        int votes = 0;
        for (int b = a; b < k; ++b) {
            votes += reference_labels[static_cast<std::size_t>(scratch[static_cast<std::size_t>(b)].second)] == label;
        }
        if (votes > best_votes) {
            best_votes = votes;
            best_label = label;
        }
    }
    return best_label;
}

} // namespace detail

namespace {

double squared_distance(const Matrix& A, Index i, const Matrix& B, Index j) {
    return (A.row(i) - B.row(j)).squaredNorm();
}

} // namespace

namespace serial {

PairTerms pairwise_terms(const Matrix& Y, const Labels& labels, PairKernel kernel) {
    detail::check_pair_inputs(Y, labels);
    const Index n = Y.rows();
    PairTerms out;
    out.grad_y = Matrix::Zero(n, Y.cols());

    Matrix D(n, n);
    for (Index i = 0; i < n; ++i) {
        D(i, i) = 0.0;
        for (Index j = 0; j < n; ++j) {
            if (i != j) D(i, j) = squared_distance(Y, i, Y, j);
        }
    }
    out.distance_evaluations = static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n - 1);

    auto same = [&](Index i, Index j) { return labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]; };
    std::vector<double> peers(static_cast<std::size_t>(n), 0.0);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            if (i != j && same(i, j)) peers[static_cast<std::size_t>(i)] += 1.0;
        }
        if (peers[static_cast<std::size_t>(i)] == 0.0) {
            throw Error(ErrorKind::data, "point " + std::to_string(i) + " has no same-class neighbor (isolated class instance)");
        }
    }

    Matrix coef = Matrix::Zero(n, n);  // d loss / d d_ij
    if (kernel == PairKernel::gaussian) {
        for (Index i = 0; i < n; ++i) {
            double dmin = std::numeric_limits<double>::infinity();
            for (Index k = 0; k < n; ++k) if (k != i) dmin = std::min(dmin, D(i, k));
            double z = 0.0;
            for (Index k = 0; k < n; ++k) if (k != i) z += std::exp(-(D(i, k) - dmin));
            const double lse = std::log(z) - dmin;  // log sum_k exp(-d_ik)
            if (!std::isfinite(lse)) throw Error(ErrorKind::numeric, "Gaussian normalizer overflowed at row " + std::to_string(i));
            const double ni = peers[static_cast<std::size_t>(i)];
            for (Index j = 0; j < n; ++j) {
                if (j == i) continue;
                const double q = std::exp(-D(i, j) - lse);
                const double ind = same(i, j) ? 1.0 : 0.0;
                out.loss += ind * (D(i, j) + lse);
                coef(i, j) = ind - ni * q;
            }
        }
    } else {
        double total = 0.0;
        double pairs = 0.0;
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < n; ++j) {
                if (i == j) continue;
                total += 1.0 / (1.0 + D(i, j));
                if (same(i, j)) {
                    out.loss += std::log1p(D(i, j));
                    pairs += 1.0;
                }
            }
        }
        if (!(total > 0.0) || !std::isfinite(total)) throw Error(ErrorKind::numeric, "Student-t normalizer is degenerate");
        out.loss += pairs * std::log(total);
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < n; ++j) {
                if (i == j) continue;
                const double w = 1.0 / (1.0 + D(i, j));
                coef(i, j) = w * ((same(i, j) ? 1.0 : 0.0) - pairs * w / total);
            }
        }
    }

    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            if (i == j) continue;
            RowVector diff = Y.row(i) - Y.row(j);
            out.grad_y.row(i) += 2.0 * coef(i, j) * diff;
            out.grad_y.row(j) -= 2.0 * coef(i, j) * diff;
        }
    }
    if (!std::isfinite(out.loss)) throw Error(ErrorKind::numeric, "pairwise loss is not finite");
    return out;
}

ExemplarTerms exemplar_terms(const Matrix& Y, const Labels& labels, const Matrix& Ye, const Labels& exemplar_labels,
                             ExemplarNormalization normalization) {
    detail::check_exemplar_inputs(Y, labels, Ye, exemplar_labels);
    const Index n = Y.rows();
    const Index z = Ye.rows();
    ExemplarTerms out;
    out.grad_y = Matrix::Zero(n, Y.cols());
    out.grad_exemplar_y = Matrix::Zero(z, Y.cols());

    Matrix w(n, z);
    Vector row_sum = Vector::Zero(n);
    Vector row_pairs = Vector::Zero(n);
    double loss = 0.0;
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < z; ++j) {
            const double d = squared_distance(Y, i, Ye, j);
            ++out.distance_evaluations;
            w(i, j) = 1.0 / (1.0 + d);
            row_sum(i) += w(i, j);
            if (labels[static_cast<std::size_t>(i)] == exemplar_labels[static_cast<std::size_t>(j)]) {
                loss += std::log1p(d);
                row_pairs(i) += 1.0;
            }
        }
    }

    const double total = row_sum.sum();
    const double pairs = row_pairs.sum();
    if (normalization == ExemplarNormalization::global) {
        if (!(total > 0.0) || !std::isfinite(total)) throw Error(ErrorKind::numeric, "exemplar normalizer is degenerate");
        loss += pairs * std::log(total);
    } else {
        for (Index i = 0; i < n; ++i) {
            if (!(row_sum(i) > 0.0)) throw Error(ErrorKind::numeric, "exemplar normalizer underflowed at row " + std::to_string(i));
            loss += row_pairs(i) * std::log(row_sum(i));
        }
    }
    out.loss = loss;

    for (Index i = 0; i < n; ++i) {
        const double scale = normalization == ExemplarNormalization::global ? pairs / total : row_pairs(i) / row_sum(i);
        for (Index j = 0; j < z; ++j) {
            const double ind = labels[static_cast<std::size_t>(i)] == exemplar_labels[static_cast<std::size_t>(j)] ? 1.0 : 0.0;
            const double coef = w(i, j) * (ind - scale * w(i, j));
            RowVector diff = Y.row(i) - Ye.row(j);
            out.grad_y.row(i) += 2.0 * coef * diff;
            out.grad_exemplar_y.row(j) -= 2.0 * coef * diff;
        }
    }
    if (!std::isfinite(out.loss)) throw Error(ErrorKind::numeric, "exemplar loss is not finite");
    return out;
}

Labels knn_vote(const Matrix& references, const Labels& reference_labels, const Matrix& queries, int k) {
    detail::check_knn_inputs(references, reference_labels, queries, k);
    Labels out(static_cast<std::size_t>(queries.rows()));
    std::vector<std::pair<double, Index>> scratch;
    for (Index q = 0; q < queries.rows(); ++q) {
        out[static_cast<std::size_t>(q)] = detail::knn_vote_one(references, reference_labels, queries.row(q).data(), k, scratch);
    }
    return out;
}

} // namespace serial

// ---------------------------------------------------------------- dispatch

PairTerms pairwise_terms(const Matrix& Y, const Labels& labels, PairKernel kernel, Backend backend) {
    return backend == Backend::serial ? serial::pairwise_terms(Y, labels, kernel) : omp::pairwise_terms(Y, labels, kernel);
}

ExemplarTerms exemplar_terms(const Matrix& Y, const Labels& labels, const Matrix& Ye, const Labels& exemplar_labels,
                             ExemplarNormalization normalization, Backend backend) {
    return backend == Backend::serial ? serial::exemplar_terms(Y, labels, Ye, exemplar_labels, normalization)
                                      : omp::exemplar_terms(Y, labels, Ye, exemplar_labels, normalization);
}

Labels knn_vote(const Matrix& references, const Labels& reference_labels, const Matrix& queries, int k, Backend backend) {
    return backend == Backend::serial ? serial::knn_vote(references, reference_labels, queries, k)
                                      : omp::knn_vote(references, reference_labels, queries, k);
}

Matrix pairwise_probabilities(const Matrix& Y, PairKernel kernel) {
    const Index n = Y.rows();
    Matrix Q = Matrix::Zero(n, n);
    if (kernel == PairKernel::gaussian) {
        for (Index i = 0; i < n; ++i) {
            double dmin = std::numeric_limits<double>::infinity();
            for (Index k = 0; k < n; ++k) if (k != i) dmin = std::min(dmin, squared_distance(Y, i, Y, k));
            double z = 0.0;
            for (Index k = 0; k < n; ++k) {
                if (k == i) continue;
                Q(i, k) = std::exp(-(squared_distance(Y, i, Y, k) - dmin));
                z += Q(i, k);
            }
            Q.row(i) /= z;
        }
    } else {
        double total = 0.0;
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < n; ++j) {
                if (i == j) continue;
                Q(i, j) = 1.0 / (1.0 + squared_distance(Y, i, Y, j));
                total += Q(i, j);
            }
        }
        Q /= total;
    }
    return Q;
}

Matrix exemplar_probabilities(const Matrix& Y, const Matrix& Ye, ExemplarNormalization normalization) {
    Matrix Q(Y.rows(), Ye.rows());
    for (Index i = 0; i < Y.rows(); ++i) {
        for (Index j = 0; j < Ye.rows(); ++j) Q(i, j) = 1.0 / (1.0 + squared_distance(Y, i, Ye, j));
    }
    if (normalization == ExemplarNormalization::global) {
        Q /= Q.sum();
    } else {
        for (Index i = 0; i < Q.rows(); ++i) Q.row(i) /= Q.row(i).sum();
    }
    return Q;
}

} // namespace enhope::kernels
