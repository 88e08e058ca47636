// OpenMP kernels. Rows are processed in fixed chunks of parallel::kChunkRows;
// every reduction is formed per chunk and summed in chunk order afterwards.

#include "enhope/error.hpp"
#include "enhope/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace enhope::kernels::omp {

using Index = Eigen::Index;

namespace {

struct ChunkRange {
    Index begin;
    Index end;
};

ChunkRange chunk_range(Index chunk, Index rows) {
    const auto step = static_cast<Index>(parallel::kChunkRows);
    return {chunk * step, std::min(rows, (chunk + 1) * step)};
}

Index chunks_for(Index rows) { return static_cast<Index>(parallel::chunk_count(static_cast<std::size_t>(rows))); }

double ordered_sum(const std::vector<double>& parts) {
    double s = 0.0;
    for (double p : parts) s += p;
    return s;
}

} // namespace

PairTerms pairwise_terms(const Matrix& Y, const Labels& labels, PairKernel kernel) {
    detail::check_pair_inputs(Y, labels);
    const Index n = Y.rows();
    const Index chunks = chunks_for(n);
    const int threads = parallel::thread_count();

    // Pass 1: per-row normalizer and loss pieces.
    Vector lse(n);        // Gaussian: log sum_k exp(-d_ik)
    Vector peers(n);
    std::vector<double> loss_part(static_cast<std::size_t>(chunks), 0.0);
    std::vector<double> total_part(static_cast<std::size_t>(chunks), 0.0);
    std::vector<double> pairs_part(static_cast<std::size_t>(chunks), 0.0);
    std::vector<int> bad_row(static_cast<std::size_t>(chunks), -1);

#pragma omp parallel for schedule(static) num_threads(threads)
    for (Index c = 0; c < chunks; ++c) {
        const auto [begin, end] = chunk_range(c, n);
        std::vector<double> d(static_cast<std::size_t>(n));
        double loss = 0.0, total = 0.0, pairs = 0.0;
        for (Index i = begin; i < end; ++i) {
            double ni = 0.0, dmin = std::numeric_limits<double>::infinity();
            for (Index k = 0; k < n; ++k) {
                if (k == i) continue;
                d[static_cast<std::size_t>(k)] = (Y.row(i) - Y.row(k)).squaredNorm();
                dmin = std::min(dmin, d[static_cast<std::size_t>(k)]);
                ni += labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(k)];
            }
            if (ni == 0.0 && bad_row[static_cast<std::size_t>(c)] < 0) bad_row[static_cast<std::size_t>(c)] = static_cast<int>(i);
            peers(i) = ni;
            if (kernel == PairKernel::gaussian) {
                double zsum = 0.0;
                for (Index k = 0; k < n; ++k) if (k != i) zsum += std::exp(-(d[static_cast<std::size_t>(k)] - dmin));
                lse(i) = std::log(zsum) - dmin;
                for (Index k = 0; k < n; ++k) {
                    if (k != i && labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(k)]) {
                        loss += d[static_cast<std::size_t>(k)] + lse(i);
                    }
                }
            } else {
                for (Index k = 0; k < n; ++k) {
                    if (k == i) continue;
                    total += 1.0 / (1.0 + d[static_cast<std::size_t>(k)]);
                    if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(k)]) {
                        loss += std::log1p(d[static_cast<std::size_t>(k)]);
                    }
                }
                pairs += ni;
            }
        }
        loss_part[static_cast<std::size_t>(c)] = loss;
        total_part[static_cast<std::size_t>(c)] = total;
        pairs_part[static_cast<std::size_t>(c)] = pairs;
    }
    for (int row : bad_row) {
        if (row >= 0) throw Error(ErrorKind::data, "point " + std::to_string(row) + " has no same-class neighbor (isolated class instance)");
    }

    PairTerms out;
    out.loss = ordered_sum(loss_part);
    const double total = ordered_sum(total_part);
    const double pairs = ordered_sum(pairs_part);
    if (kernel == PairKernel::gaussian) {
        if (!lse.allFinite()) throw Error(ErrorKind::numeric, "Gaussian normalizer overflowed");
    } else {
        if (!(total > 0.0) || !std::isfinite(total)) throw Error(ErrorKind::numeric, "Student-t normalizer is degenerate");
        out.loss += pairs * std::log(total);
    }
    if (!std::isfinite(out.loss)) throw Error(ErrorKind::numeric, "pairwise loss is not finite");

    // Pass 2: gradient rows. Both ordered pairs (i,j) and (j,i) pull on row i.
    out.grad_y = Matrix::Zero(n, Y.cols());
#pragma omp parallel for schedule(static) num_threads(threads)
    for (Index c = 0; c < chunks; ++c) {
        const auto [begin, end] = chunk_range(c, n);
        for (Index i = begin; i < end; ++i) {
            RowVector g = RowVector::Zero(Y.cols());
            for (Index j = 0; j < n; ++j) {
                if (j == i) continue;
                RowVector diff = Y.row(i) - Y.row(j);
                const double d = diff.squaredNorm();
                const double ind = labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)] ? 1.0 : 0.0;
                double coef;
                if (kernel == PairKernel::gaussian) {
                    coef = (ind - peers(i) * std::exp(-d - lse(i))) + (ind - peers(j) * std::exp(-d - lse(j)));
                } else {
                    const double w = 1.0 / (1.0 + d);
                    coef = 2.0 * w * (ind - pairs * w / total);
                }
                g += 2.0 * coef * diff;
            }
            out.grad_y.row(i) = g;
        }
    }
    out.distance_evaluations = 2u * static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n - 1);
    return out;
}

ExemplarTerms exemplar_terms(const Matrix& Y, const Labels& labels, const Matrix& Ye, const Labels& exemplar_labels,
                             ExemplarNormalization normalization) {
    detail::check_exemplar_inputs(Y, labels, Ye, exemplar_labels);
    const Index n = Y.rows();
    const Index z = Ye.rows();
    const Index h = Y.cols();
    const Index chunks = chunks_for(n);
    const int threads = parallel::thread_count();
    const bool global = normalization == ExemplarNormalization::global;

    Matrix w(n, z);
    Vector row_sum(n);
    Vector row_pairs(n);
    std::vector<double> loss_part(static_cast<std::size_t>(chunks), 0.0);
    std::vector<double> total_part(static_cast<std::size_t>(chunks), 0.0);
    std::vector<double> pairs_part(static_cast<std::size_t>(chunks), 0.0);
    std::vector<int> bad_row(static_cast<std::size_t>(chunks), -1);

#pragma omp parallel for schedule(static) num_threads(threads)
    for (Index c = 0; c < chunks; ++c) {
        const auto [begin, end] = chunk_range(c, n);
        double loss = 0.0, total = 0.0, pairs = 0.0;
        for (Index i = begin; i < end; ++i) {
            double s = 0.0, np = 0.0, li = 0.0;
            for (Index j = 0; j < z; ++j) {
                const double d = (Y.row(i) - Ye.row(j)).squaredNorm();
                w(i, j) = 1.0 / (1.0 + d);
                s += w(i, j);
                if (labels[static_cast<std::size_t>(i)] == exemplar_labels[static_cast<std::size_t>(j)]) {
                    li += std::log1p(d);
                    np += 1.0;
                }
            }
            row_sum(i) = s;
            row_pairs(i) = np;
            if (!global) {
                if (!(s > 0.0) && bad_row[static_cast<std::size_t>(c)] < 0) bad_row[static_cast<std::size_t>(c)] = static_cast<int>(i);
                li += np * std::log(s);
            }
            loss += li;
            total += s;
            pairs += np;
        }
        loss_part[static_cast<std::size_t>(c)] = loss;
        total_part[static_cast<std::size_t>(c)] = total;
        pairs_part[static_cast<std::size_t>(c)] = pairs;
    }
    for (int row : bad_row) {
        if (row >= 0) throw Error(ErrorKind::numeric, "exemplar normalizer underflowed at row " + std::to_string(row));
    }

    ExemplarTerms out;
    out.distance_evaluations = static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(z);
    out.loss = ordered_sum(loss_part);
    const double total = ordered_sum(total_part);
    const double pairs = ordered_sum(pairs_part);
    if (global) {
        if (!(total > 0.0) || !std::isfinite(total)) throw Error(ErrorKind::numeric, "exemplar normalizer is degenerate");
        out.loss += pairs * std::log(total);
    }
    if (!std::isfinite(out.loss)) throw Error(ErrorKind::numeric, "exemplar loss is not finite");

    out.grad_y.resize(n, h);
    std::vector<Matrix> exemplar_part(static_cast<std::size_t>(chunks), Matrix::Zero(z, h));
#pragma omp parallel for schedule(static) num_threads(threads)
    for (Index c = 0; c < chunks; ++c) {
        const auto [begin, end] = chunk_range(c, n);
        Matrix& ge = exemplar_part[static_cast<std::size_t>(c)];
        for (Index i = begin; i < end; ++i) {
            const double scale = global ? pairs / total : row_pairs(i) / row_sum(i);
            RowVector g = RowVector::Zero(h);
            for (Index j = 0; j < z; ++j) {
                const double ind = labels[static_cast<std::size_t>(i)] == exemplar_labels[static_cast<std::size_t>(j)] ? 1.0 : 0.0;
                const double coef = 2.0 * w(i, j) * (ind - scale * w(i, j));
                RowVector diff = Y.row(i) - Ye.row(j);
                g += coef * diff;
                ge.row(j) -= coef * diff;
            }
            out.grad_y.row(i) = g;
        }
    }
    out.grad_exemplar_y = Matrix::Zero(z, h);
    for (const auto& part : exemplar_part) out.grad_exemplar_y += part;
    return out;
}

Labels knn_vote(const Matrix& references, const Labels& reference_labels, const Matrix& queries, int k) {
    detail::check_knn_inputs(references, reference_labels, queries, k);
    const Index nq = queries.rows();
    Labels out(static_cast<std::size_t>(nq));
#pragma omp parallel num_threads(parallel::thread_count())
    {
        std::vector<std::pair<double, Index>> scratch;
#pragma omp for schedule(dynamic, 16)
        for (Index q = 0; q < nq; ++q) {
            out[static_cast<std::size_t>(q)] =
                detail::knn_vote_one(references, reference_labels, queries.row(q).data(), k, scratch);
        }
    }
    return out;
}

} // namespace enhope::kernels::omp
