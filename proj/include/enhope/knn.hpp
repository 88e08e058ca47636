#pragma once

#include "enhope/data.hpp"
#include "enhope/embedding.hpp"
#include "enhope/exemplars.hpp"

#include <string>

namespace enhope {

/// Exact brute-force kNN by squared Euclidean distance with majority vote.
Labels knn_classify(const Matrix& references, const Labels& reference_labels, const Matrix& queries, int k,
                    Backend backend = Backend::parallel);

/// k = 1 with at most 10 exemplars, 5 otherwise (pairwise models have z = 0
/// and classify against training points with 5NN).
int default_k(std::size_t exemplar_count);

/// Fraction of predictions that differ from the truth.
double error_rate(const Labels& predicted, const Labels& truth);

struct Classification {
    Labels predictions;
    double error = 0.0;
};

/// Embeds `queries` (already normalized) and classifies them against the
/// embedded references.
Classification classify_embedded(const EmbeddingModel& model, const ExemplarSet& references, const Matrix& queries,
                                 const Labels& truth, int k, Backend backend = Backend::parallel);

/// Applies the model's input normalization to the raw test features first.
Classification classify_with_model(const EmbeddingModel& model, const ExemplarSet& exemplars, const Dataset& test,
                                   int k, Backend backend = Backend::parallel);

struct BenchmarkReport {
    double exemplar_error = 0.0;
    double exemplar_seconds = 0.0;  ///< includes embedding the test set
    double full_error = 0.0;
    double full_seconds = 0.0;
    double speedup = 0.0;
    std::size_t n_test = 0, n_train = 0, z = 0, input_dim = 0, output_dim = 0;
    int k_full = 0, k_exemplar = 0;
    int repeats = 0;
    bool parallel = false;

    std::string to_key_value() const;
    std::string to_json() const;
};

struct BenchmarkOptions {
    int k_full = 5;
    int k_exemplar = 0;  ///< 0 selects default_k(z)
    int repeats = 3;
    bool parallel = false;
};

/// Times exemplar kNN in embedding space (test embedding included) against
/// brute-force kNN over all training points in input space. Median of
/// `repeats` runs after one untimed warm-up.
BenchmarkReport benchmark(const EmbeddingModel& model, const ExemplarSet& exemplars, const Dataset& train,
                          const Dataset& test, const BenchmarkOptions& options);

} // namespace enhope
