#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

#include <exception>
#include <vector>

namespace baryflow {

// Caps solver-level parallelism; n <= 0 keeps the runtime default.
inline void set_thread_limit(int n)
{
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

inline int thread_limit()
{
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// Runs f(k) for k in [0, count), in parallel when OpenMP is available; the first
// exception (lowest k) is rethrown on the calling thread.
template <class F>
void parallel_for(int count, F&& f)
{
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int k = 0; k < count; ++k) {
        try {
            f(k);
        } catch (...) {
            errors[static_cast<std::size_t>(k)] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace baryflow
