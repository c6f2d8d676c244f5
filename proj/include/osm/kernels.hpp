#pragma once

#include <cstddef>

// Dense matmul kernels behind the autodiff graph. Each output element is
// produced by exactly one thread with the same inner summation order as the
// serial reference, so parallel and serial results are bitwise identical and
// independent of the thread count.
namespace osm::kernels {

// Serial reference implementations, kept for testing and benchmarking.
namespace serial {
void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
}  // namespace serial

// OpenMP implementations (parallel over output rows). Fall back to serial
// when built without OpenMP.
namespace parallel {
void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
}  // namespace parallel

bool parallel_enabled();
void set_parallel(bool on);

// Dispatching entry points used by the graph ops.
// c(m x n) = a(m x k) * b(k x n)      [nn]
// c(m x n) = a(m x k) * b(n x k)^T    [nt]
// c(m x n) = a(k x m)^T * b(k x n)    [tn]
// accumulate=true adds into c instead of overwriting.
void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);

}  // namespace osm::kernels
