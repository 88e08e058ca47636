#include "enhope/knn.hpp"

#include "enhope/error.hpp"
#include "enhope/kernels.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <sstream>

namespace enhope {

Labels knn_classify(const Matrix& references, const Labels& reference_labels, const Matrix& queries, int k,
                    Backend backend) {
    return kernels::knn_vote(references, reference_labels, queries, k, backend);
}

int default_k(std::size_t exemplar_count) {
    if (exemplar_count == 0) return 5;
    return exemplar_count <= 10 ? 1 : 5;
}

double error_rate(const Labels& predicted, const Labels& truth) {
    if (predicted.size() != truth.size()) throw Error(ErrorKind::dimension, "prediction and truth lengths differ");
    if (truth.empty()) return 0.0;
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) wrong += predicted[i] != truth[i];
    return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

Classification classify_embedded(const EmbeddingModel& model, const ExemplarSet& references, const Matrix& queries,
                                 const Labels& truth, int k, Backend backend) {
    if (static_cast<std::size_t>(queries.cols()) != model.input_dim()) {
        throw Error(ErrorKind::dimension, "model expects " + std::to_string(model.input_dim()) +
                                              " features, data has " + std::to_string(queries.cols()));
    }
    Matrix Yq = forward(model, queries, backend);
    Matrix Yr = forward(model, references.vectors, backend);
    Classification out;
    out.predictions = knn_classify(Yr, references.labels, Yq, k, backend);
    if (!truth.empty()) out.error = error_rate(out.predictions, truth);
    return out;
}

Classification classify_with_model(const EmbeddingModel& model, const ExemplarSet& exemplars, const Dataset& test,
                                   int k, Backend backend) {
    return classify_embedded(model, exemplars, model.norm.apply(test.features), test.labels, k, backend);
}

namespace {

template <class Fn>
double median_seconds(int repeats, Fn&& fn) {
    fn();  // warm-up
    std::vector<double> times;
    for (int r = 0; r < repeats; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        fn();
        auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    const auto mid = times.size() / 2;
    return times.size() % 2 ? times[mid] : 0.5 * (times[mid - 1] + times[mid]);
}

} // namespace

BenchmarkReport benchmark(const EmbeddingModel& model, const ExemplarSet& exemplars, const Dataset& train,
                          const Dataset& test, const BenchmarkOptions& options) {
    if (options.repeats < 3) throw Error(ErrorKind::config, "benchmark needs at least 3 repeats");
    if (exemplars.size() == 0) throw Error(ErrorKind::config, "benchmark needs an exemplar model");
    const Backend backend = options.parallel ? Backend::parallel : Backend::serial;

    BenchmarkReport report;
    report.n_test = test.size();
    report.n_train = train.size();
    report.z = exemplars.size();
    report.input_dim = model.input_dim();
    report.output_dim = model.output_dim();
    report.k_full = options.k_full;
    report.k_exemplar = options.k_exemplar > 0 ? options.k_exemplar : default_k(exemplars.size());
    report.repeats = options.repeats;
    report.parallel = options.parallel;

    const Matrix queries = model.norm.apply(test.features);
    const Matrix references = model.norm.apply(train.features);
    const Matrix exemplar_embedding = forward(model, exemplars.vectors, backend);

    Labels exemplar_pred, full_pred;
    report.exemplar_seconds = median_seconds(options.repeats, [&] {
        Matrix Yq = forward(model, queries, backend);
        exemplar_pred = knn_classify(exemplar_embedding, exemplars.labels, Yq, report.k_exemplar, backend);
    });
    report.full_seconds = median_seconds(options.repeats, [&] {
        full_pred = knn_classify(references, train.labels, queries, report.k_full, backend);
    });
    report.exemplar_error = error_rate(exemplar_pred, test.labels);
    report.full_error = error_rate(full_pred, test.labels);
    report.speedup = report.exemplar_seconds > 0.0 ? report.full_seconds / report.exemplar_seconds : 0.0;
    return report;
}

std::string BenchmarkReport::to_key_value() const {
    std::ostringstream out;
    out.precision(17);
    out << "exemplar_error=" << exemplar_error << '\n'
        << "exemplar_seconds=" << exemplar_seconds << '\n'
        << "full_error=" << full_error << '\n'
        << "full_seconds=" << full_seconds << '\n'
        << "speedup=" << speedup << '\n'
        << "n_test=" << n_test << '\n'
        << "n_train=" << n_train << '\n'
        << "z=" << z << '\n'
        << "H=" << input_dim << '\n'
        << "h=" << output_dim << '\n'
        << "k_full=" << k_full << '\n'
        << "k_exemplar=" << k_exemplar << '\n'
        << "repeats=" << repeats << '\n'
        << "parallel=" << (parallel ? 1 : 0) << '\n';
    return out.str();
}

std::string BenchmarkReport::to_json() const {
    nlohmann::json j = {
        {"exemplar_error", exemplar_error}, {"exemplar_seconds", exemplar_seconds},
        {"full_error", full_error},         {"full_seconds", full_seconds},
        {"speedup", speedup},               {"n_test", n_test},
        {"n_train", n_train},               {"z", z},
        {"H", input_dim},                   {"h", output_dim},
        {"k_full", k_full},                 {"k_exemplar", k_exemplar},
        {"repeats", repeats},               {"parallel", parallel},
    };
    return j.dump(2) + "\n";
}

} // namespace enhope
