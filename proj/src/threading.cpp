#include "robustcov/threading.hpp"

#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace robustcov {

namespace {

int compute_effective_threads() {
#ifdef _OPENMP
    int n = omp_get_max_threads();
#else
    int n = 1;
#endif
    if (const char* env = std::getenv("ROBUSTCOV_THREADS")) {
        int cap = std::atoi(env);
        if (cap >= 1 && cap < n) n = cap;
    }
    return n < 1 ? 1 : n;
}

} // namespace

int effective_threads() {
    static const int n = compute_effective_threads();
    return n;
}

} // namespace robustcov
