#include "osm/kernels.hpp"

#include <atomic>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace osm::kernels {

namespace {

std::atomic<bool> g_parallel{true};

// Work below this many multiply-adds is not worth spawning a team.
constexpr long long kParallelCutoff = 1 << 15;

inline void clear_if(double* c, size_t n, bool accumulate) {
    if (!accumulate) std::memset(c, 0, n * sizeof(double));
}

// Row kernels shared by both backends: one call computes one output row,
// serial in k and j, so the summation order never depends on scheduling.
inline void row_nn(const double* a, const double* b, double* c, int k, int n, int i) {
    const double* ai = a + static_cast<size_t>(i) * k;
    double* ci = c + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
        double aip = ai[p];
        const double* bp = b + static_cast<size_t>(p) * n;
        for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
}

inline void row_nt(const double* a, const double* b, double* c, int k, int n, int i) {
    const double* ai = a + static_cast<size_t>(i) * k;
    double* ci = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
        const double* bj = b + static_cast<size_t>(j) * k;
        double s = 0.0;
        for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
        ci[j] += s;
    }
}

inline void row_tn(const double* a, const double* b, double* c, int k, int n, int mrows, int i) {
    // a is k x mrows; this computes output row i from column i of a.
    double* ci = c + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
        double aval = a[static_cast<size_t>(p) * mrows + i];
        const double* bp = b + static_cast<size_t>(p) * n;
        for (int j = 0; j < n; ++j) ci[j] += aval * bp[j];
    }
}

}  // namespace

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }
void set_parallel(bool on) { g_parallel.store(on, std::memory_order_relaxed); }

namespace serial {

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    clear_if(c, static_cast<size_t>(m) * n, accumulate);
    for (int i = 0; i < m; ++i) row_nn(a, b, c, k, n, i);
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    clear_if(c, static_cast<size_t>(m) * n, accumulate);
    for (int i = 0; i < m; ++i) row_nt(a, b, c, k, n, i);
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    clear_if(c, static_cast<size_t>(m) * n, accumulate);
    for (int i = 0; i < m; ++i) row_tn(a, b, c, k, n, m, i);
}

}  // namespace serial

namespace parallel {

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    clear_if(c, static_cast<size_t>(m) * n, accumulate);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int i = 0; i < m; ++i) row_nn(a, b, c, k, n, i);
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    clear_if(c, static_cast<size_t>(m) * n, accumulate);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int i = 0; i < m; ++i) row_nt(a, b, c, k, n, i);
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    clear_if(c, static_cast<size_t>(m) * n, accumulate);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int i = 0; i < m; ++i) row_tn(a, b, c, k, n, m, i);
}

}  // namespace parallel

namespace {
inline bool use_parallel(int m, int k, int n) {
    return parallel_enabled() &&
           static_cast<long long>(m) * k * n >= kParallelCutoff;
}
}  // namespace

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    if (use_parallel(m, k, n))
        parallel::matmul_nn(a, b, c, m, k, n, accumulate);
    else
        serial::matmul_nn(a, b, c, m, k, n, accumulate);
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    if (use_parallel(m, k, n))
        parallel::matmul_nt(a, b, c, m, k, n, accumulate);
    else
        serial::matmul_nt(a, b, c, m, k, n, accumulate);
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    if (use_parallel(m, k, n))
        parallel::matmul_tn(a, b, c, m, k, n, accumulate);
    else
        serial::matmul_tn(a, b, c, m, k, n, accumulate);
}

}  // namespace osm::kernels
