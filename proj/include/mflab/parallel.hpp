#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mflab::par {

// Every parallel loop in the library writes each output element from exactly
// one iteration, with a serial inner reduction. Results are therefore
// bit-identical to the serial reference for any thread count.

inline void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline bool in_parallel() {
#ifdef _OPENMP
    return omp_in_parallel() != 0;
#else
    return false;
#endif
}

template <class F>
void for_index(std::ptrdiff_t n, F&& body) {
#ifdef _OPENMP
    if (!in_parallel()) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
        return;
    }
#endif
    for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
}

// Dynamic schedule for loops with very uneven per-cell cost (sweep cells).
template <class F>
void for_index_dynamic(std::ptrdiff_t n, F&& body) {
#ifdef _OPENMP
    if (!in_parallel()) {
#pragma omp parallel for schedule(dynamic, 1)
        for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
        return;
    }
#endif
    for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
}

}  // namespace mflab::par
