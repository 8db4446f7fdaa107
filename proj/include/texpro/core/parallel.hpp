#pragma once

#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace texpro::par {

// Runtime switch between the OpenMP kernels and the serial reference path.
// Tests flip this to compare both implementations on identical inputs.
inline bool& parallel_enabled() {
    static bool enabled = true;
    return enabled;
}

inline int max_threads() {
#ifdef _OPENMP
    return parallel_enabled() ? omp_get_max_threads() : 1;
#else
    return 1;
#endif
}

// Static schedule so the index->thread partition is identical across runs.
template <typename F>
void parallel_for(int64_t n, F&& fn) {
#ifdef _OPENMP
    if (parallel_enabled() && n > 1) {
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
#endif
    for (int64_t i = 0; i < n; ++i) fn(i);
}

template <typename F>
void parallel_for_2(int64_t n, F&& fn) {
#ifdef _OPENMP
    if (parallel_enabled() && n > 1) {
#pragma omp parallel
        {
            int tid = omp_get_thread_num();
#pragma omp for schedule(static)
            for (int64_t i = 0; i < n; ++i) fn(i, tid);
        }
        return;
    }
#endif
    for (int64_t i = 0; i < n; ++i) fn(i, 0);
}

// Scatter accumulation that matches sequential results: each thread owns a
// full double-precision copy of the target, combined afterwards in thread
// order. The combine order is fixed, so outputs are run-to-run stable.
class PartitionedAccumulator {
  public:
    explicit PartitionedAccumulator(size_t size)
        : size_(size), buffers_(static_cast<size_t>(max_threads()), std::vector<double>(size, 0.0)) {}

    double* buffer(int tid) { return buffers_[static_cast<size_t>(tid)].data(); }

    // Adds the combined result into dst (float or double).
    template <typename T>
    void combine_into(T* dst) const {
        for (size_t i = 0; i < size_; ++i) {
            double acc = 0.0;
            for (const auto& b : buffers_) acc += b[i];
            dst[i] += static_cast<T>(acc);
        }
    }

    size_t size() const { return size_; }

  private:
    size_t size_;
    std::vector<std::vector<double>> buffers_;
};

// Deterministic sum reduction: per-thread partials in double, combined in
// thread order.
template <typename F>
double reduce_sum(int64_t n, F&& term) {
#ifdef _OPENMP
    if (parallel_enabled() && n > 1) {
        int nt = omp_get_max_threads();
        std::vector<double> partial(static_cast<size_t>(nt), 0.0);
#pragma omp parallel
        {
            int tid = omp_get_thread_num();
            double local = 0.0;
#pragma omp for schedule(static)
            for (int64_t i = 0; i < n; ++i) local += term(i);
            partial[static_cast<size_t>(tid)] = local;
        }
        double total = 0.0;
        for (double p : partial) total += p;
        return total;
    }
#endif
    double total = 0.0;
    for (int64_t i = 0; i < n; ++i) total += term(i);
    return total;
}

}  // namespace texpro::par
