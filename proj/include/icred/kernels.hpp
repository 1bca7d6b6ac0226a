#pragma once

#include <cstddef>

namespace icred::kern {

// Dense kernels behind the tape operations. Every kernel exists twice: a
// plain serial loop under serial:: (the reference used by tests) and an
// OpenMP variant under par::. The unprefixed entry points dispatch on
// problem size and the configured thread budget. Both variants accumulate
// each output element in the same order, so results are bit-identical.

/// Caps OpenMP worker threads for all dispatched kernels (1 = serial).
void set_max_threads(int n);
int max_threads();

/// Elements of work below which dispatch always stays serial.
inline constexpr std::size_t kParallelCutoff = 16384;

namespace serial {
// y = A x            (A: m*n row-major, x: n, y: m)
void matvec(const double* a, const double* x, double* y, std::size_t m, std::size_t n);
// y = A^T x          (A: m*n row-major, x: m, y: n)
void matvec_t(const double* a, const double* x, double* y, std::size_t m, std::size_t n);
// A += alpha * u v^T (u: m, v: n)
void ger(double* a, const double* u, const double* v, double alpha, std::size_t m, std::size_t n);
// y += alpha * x
void axpy(double* y, const double* x, double alpha, std::size_t n);
}  // namespace serial

namespace par {
void matvec(const double* a, const double* x, double* y, std::size_t m, std::size_t n);
void matvec_t(const double* a, const double* x, double* y, std::size_t m, std::size_t n);
void ger(double* a, const double* u, const double* v, double alpha, std::size_t m, std::size_t n);
void axpy(double* y, const double* x, double alpha, std::size_t n);
}  // namespace par

void matvec(const double* a, const double* x, double* y, std::size_t m, std::size_t n);
void matvec_t(const double* a, const double* x, double* y, std::size_t m, std::size_t n);
void ger(double* a, const double* u, const double* v, double alpha, std::size_t m, std::size_t n);
void axpy(double* y, const double* x, double alpha, std::size_t n);

}  // namespace icred::kern
