#include "enhope/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace enhope::parallel {

namespace {

int from_environment() {
    if (const char* env = std::getenv("ENHOPE_THREADS")) {
        try {
            int n = std::stoi(env);
            if (n > 0) return n;
        } catch (...) {
        }
    }
    return omp_get_max_threads();
}

int override_threads = 0;

} // namespace

int thread_count() {
    if (override_threads > 0) return override_threads;
    static const int from_env = from_environment();
    return from_env;
}

void set_thread_count(int threads) { override_threads = threads > 0 ? threads : 0; }

} // namespace enhope::parallel
