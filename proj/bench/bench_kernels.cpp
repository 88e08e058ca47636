// Serial reference kernels against their OpenMP counterparts.
// Usage: bench_kernels [n] [repeats]; thread count from ENHOPE_THREADS.

#include "enhope/embedding.hpp"
#include "enhope/kernels.hpp"
#include "enhope/objective.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>
#include <vector>

using namespace enhope;

namespace {

Matrix gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
    std::normal_distribution<double> g;
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    return m;
}

template <class Fn>
double median_ms(int repeats, Fn&& fn) {
    fn();
    std::vector<double> t;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        t.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    std::sort(t.begin(), t.end());
    return t[t.size() / 2];
}

void row(const char* name, double serial, double parallel) {
    std::printf("%-24s %12.3f %12.3f %8.2fx\n", name, serial, parallel, serial / parallel);
}

} // namespace

int main(int argc, char** argv) {
    const Eigen::Index n = argc > 1 ? std::atol(argv[1]) : 20000;
    const int repeats = argc > 2 ? std::atoi(argv[2]) : 5;
    std::mt19937_64 rng(1);

    std::printf("threads=%d n=%ld repeats=%d\n", parallel::thread_count(), static_cast<long>(n), repeats);
    std::printf("%-24s %12s %12s %9s\n", "kernel", "serial ms", "parallel ms", "speedup");

    const Matrix X = gaussian(rng, n, 784);
    const EmbeddingModel model = init_high_order({784, 2, 200, 100}, 2, 1);
    row("forward (H=784)", median_ms(repeats, [&] { forward(model, X, Backend::serial); }),
        median_ms(repeats, [&] { forward(model, X, Backend::parallel); }));

    const Matrix upstream = gaussian(rng, n, 2);
    row("backward_params", median_ms(repeats, [&] { backward_params(model, X, upstream, Backend::serial); }),
        median_ms(repeats, [&] { backward_params(model, X, upstream, Backend::parallel); }));

    Labels y(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 10);
    const Matrix Y = gaussian(rng, n, 2);
    const Matrix Ye = gaussian(rng, 20, 2);
    Labels ye(20);
    for (int j = 0; j < 20; ++j) ye[static_cast<std::size_t>(j)] = j % 10;
    row("exemplar_terms (z=20)",
        median_ms(repeats, [&] { kernels::serial::exemplar_terms(Y, y, Ye, ye, ExemplarNormalization::global); }),
        median_ms(repeats, [&] { kernels::omp::exemplar_terms(Y, y, Ye, ye, ExemplarNormalization::global); }));

    const Eigen::Index np = std::min<Eigen::Index>(n, 3000);
    const Matrix Yp = Y.topRows(np);
    const Labels yp(y.begin(), y.begin() + np);
    row("pairwise_terms (n<=3000)",
        median_ms(repeats, [&] { kernels::serial::pairwise_terms(Yp, yp, PairKernel::student_t); }),
        median_ms(repeats, [&] { kernels::omp::pairwise_terms(Yp, yp, PairKernel::student_t); }));

    const Eigen::Index nq = std::min<Eigen::Index>(n, 500);
    const Matrix Q = gaussian(rng, nq, 784);
    row("knn_vote (H=784, k=5)", median_ms(repeats, [&] { kernels::serial::knn_vote(X, y, Q, 5); }),
        median_ms(repeats, [&] { kernels::omp::knn_vote(X, y, Q, 5); }));
    return 0;
}
